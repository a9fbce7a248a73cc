//! Reader for the LINQS citation format: a `.content` file of
//! `<id> <binary features...> <class>` rows and a `.cites` file of
//! `<cited> <citing>` pairs, whitespace separated. Either file may be gzip
//! compressed (detected by a `.gz` suffix).

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use log::{info, warn};

use super::{Dataset, SplitSpec};
use crate::error::{GltError, Result};
use crate::graph::Graph;

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| GltError::io(path, e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

/// Builds a dataset from LINQS files. Nodes are numbered in `.content`
/// order and classes in sorted name order. Citations naming unknown papers
/// are skipped; self-citations and duplicates are dropped.
pub fn import_linqs(name: &str, content: &Path, cites: &Path) -> Result<Dataset> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f32>> = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut width = None;
    for (k, line) in open(content)?.lines().enumerate() {
        let line = line.map_err(|e| GltError::io(content, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(GltError::format(content, k + 1, "expected id, features and class"));
        }
        let f = fields.len() - 2;
        if *width.get_or_insert(f) != f {
            return Err(GltError::format(content, k + 1, format!("{f} features, earlier rows had {}", width.unwrap())));
        }
        let values = fields[1..=f]
            .iter()
            .map(|s| s.parse::<f32>().map_err(|_| GltError::format(content, k + 1, format!("bad feature {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            return Err(GltError::format(content, k + 1, format!("paper {} listed twice", fields[0])));
        }
        rows.push(values);
        class_names.push(fields[f + 1].to_string());
    }
    let num_features = width.ok_or_else(|| GltError::format(content, 0, "no rows"))?;
    let classes: Vec<&String> = class_names.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let class_index: HashMap<&String, usize> = classes.iter().enumerate().map(|(c, &s)| (s, c)).collect();
    let labels = class_names.iter().map(|s| Some(class_index[s])).collect();

    let mut raw = Vec::new();
    let mut unknown = 0usize;
    for (k, line) in open(cites)?.lines().enumerate() {
        let line = line.map_err(|e| GltError::io(cites, e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [a, b] => match (ids.get(*a), ids.get(*b)) {
                (Some(&u), Some(&v)) => raw.push((u, v)),
                _ => unknown += 1,
            },
            _ => return Err(GltError::format(cites, k + 1, "expected two paper ids")),
        }
    }
    if unknown > 0 {
        warn!("skipped {unknown} citations naming papers absent from {}", content.display());
    }
    let (edges, cleaning) = Graph::clean_edges(&raw);
    info!(
        "{name}: {} nodes, {} raw citations, {} undirected edges",
        rows.len(),
        cleaning.raw,
        cleaning.kept
    );
    let n = rows.len();
    let features = rows.into_iter().flatten().collect();
    let graph = Graph::new(n, num_features, classes.len(), features, edges, labels)?;
    Ok(Dataset {
        name: name.to_string(),
        graph,
        splits: SplitSpec::default(),
        cleaning: Some(cleaning),
    })
}
