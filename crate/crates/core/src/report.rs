//! Machine-readable outputs: `results.csv`, ticket reports and training logs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::save_ticket;
use crate::error::{GltError, Result};
use crate::glt::{RoundRecord, TicketReport};
use crate::model::{GcnDims, GcnParams};
use crate::ugs::IterationLog;

pub const RESULTS_VERSION_LINE: &str = "# glt-results v1";
pub const RESULTS_COLUMNS: &str =
    "method,seed,round,graph_sparsity,weight_sparsity,macs,val_metric,test_metric,wall_seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    pub round: usize,
    pub graph_sparsity: f64,
    pub weight_sparsity: f64,
    pub macs: u64,
    pub val_metric: f64,
    pub test_metric: f64,
    pub wall_seconds: f64,
}

impl ResultRow {
    pub fn from_record(method: &str, seed: u64, r: &RoundRecord) -> Self {
        ResultRow {
            method: method.to_string(),
            seed,
            round: r.round,
            graph_sparsity: r.graph_sparsity,
            weight_sparsity: r.weight_sparsity,
            macs: r.macs,
            val_metric: r.val_metric,
            test_metric: r.test_metric,
            wall_seconds: r.wall_seconds,
        }
    }
}

pub fn rows_from_report(method: &str, seed: u64, report: &TicketReport) -> Vec<ResultRow> {
    report.records.iter().map(|r| ResultRow::from_record(method, seed, r)).collect()
}

/// Floats use the shortest representation that parses back to the same value.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{RESULTS_VERSION_LINE}\n{RESULTS_COLUMNS}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.3}",
            r.method, r.seed, r.round, r.graph_sparsity, r.weight_sparsity, r.macs, r.val_metric, r.test_metric, r.wall_seconds
        )
        .expect("writing to a String");
    }
    out
}

pub fn parse_results_csv(path: &Path, text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == RESULTS_VERSION_LINE => {}
        _ => return Err(GltError::format(path, 1, format!("expected {RESULTS_VERSION_LINE:?}"))),
    }
    match lines.next() {
        Some((_, l)) if l == RESULTS_COLUMNS => {}
        _ => return Err(GltError::format(path, 2, "unexpected column header")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(GltError::format(path, lineno, format!("expected 9 fields, found {}", f.len())));
        }
        let bad = |what: &str| GltError::format(path, lineno, format!("cannot parse {what}"));
        let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
        rows.push(ResultRow {
            method: f[0].to_string(),
            seed: f[1].parse().map_err(|_| bad("seed"))?,
            round: f[2].parse().map_err(|_| bad("round"))?,
            graph_sparsity: num(3, "graph_sparsity")?,
            weight_sparsity: num(4, "weight_sparsity")?,
            macs: f[5].parse().map_err(|_| bad("macs"))?,
            val_metric: num(6, "val_metric")?,
            test_metric: num(7, "test_metric")?,
            wall_seconds: num(8, "wall_seconds")?,
        });
    }
    Ok(rows)
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    fs::write(path, results_csv(rows)).map_err(|e| GltError::io(path, e))
}

pub fn write_log_tsv(path: &Path, log: &[IterationLog]) -> Result<()> {
    let mut out = String::from(IterationLog::HEADER);
    out.push('\n');
    for l in log {
        out.push_str(&l.to_tsv());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| GltError::io(path, e))
}

/// The TOML form of a ticket search. Mask files are checkpoint containers
/// named relative to the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TicketDocument {
    pub method: String,
    pub seed: u64,
    pub dims: GcnDims,
    pub init_fingerprint: String,
    pub rounds: Vec<RoundEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    #[serde(flatten)]
    pub record: RoundRecord,
    pub masks: String,
}

/// Writes `<stem>.toml` and one `<stem>_round<k>.ckpt` per round into `dir`.
pub fn write_ticket_report(
    dir: &Path,
    stem: &str,
    method: &str,
    seed: u64,
    report: &TicketReport,
    params: &GcnParams<f32>,
) -> Result<TicketDocument> {
    let mut rounds = Vec::with_capacity(report.records.len());
    for (rec, ticket) in report.records.iter().zip(&report.tickets) {
        let name = format!("{stem}_round{}.ckpt", rec.round);
        save_ticket(&dir.join(&name), ticket, params)?;
        rounds.push(RoundEntry {
            record: rec.clone(),
            masks: name,
        });
    }
    let doc = TicketDocument {
        method: method.to_string(),
        seed,
        dims: report.dims,
        init_fingerprint: report.init_fingerprint.clone(),
        rounds,
    };
    let path = dir.join(format!("{stem}.toml"));
    let text = toml::to_string(&doc).map_err(|e| GltError::Contract(format!("serializing ticket report: {e}")))?;
    fs::write(&path, text).map_err(|e| GltError::io(&path, e))?;
    Ok(doc)
}

pub fn read_ticket_document(path: &Path) -> Result<TicketDocument> {
    let text = fs::read_to_string(path).map_err(|e| GltError::io(path, e))?;
    toml::from_str(&text).map_err(|e| GltError::format(path, 0, e.to_string()))
}
