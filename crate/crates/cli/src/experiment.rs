use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use glt_core::analysis::{graph_measures, macs_for_counts};
use glt_core::checkpoint::save_model;
use glt_core::dataset::{make_link_splits, make_node_splits, read_dataset, Dataset};
use glt_core::glt::{find_glt, random_prune_series, random_reinit_ticket, schedule_alive_counts, TicketReport};
use glt_core::graph::{EdgeMask, Graph};
use glt_core::model::{GcnDims, GcnParams, GraphInputs, WeightMask};
use glt_core::report::{rows_from_report, write_log_tsv, write_results_csv, write_ticket_report, ResultRow};
use glt_core::ugs::{threshold_masks, train_dense, ugs_round, LinkTask, NodeTask, Task, UgsConfig};

use crate::config::{ExperimentConfig, Mode, TaskKind};

const RANDOM_GLT_SALT: u64 = 0x0bad_5eed;
const RANDOM_PRUNE_SALT: u64 = 0x0dd_ba11;

/// The graph message passing runs on, the supervision, and model widths
/// for one seed.
pub struct Prepared {
    pub graph: Graph,
    pub task: Task,
    pub dims: GcnDims,
}

pub fn load_dataset(path: &Path, normalize: bool) -> Result<Dataset> {
    let mut ds = read_dataset(path).with_context(|| format!("cannot load dataset {}", path.display()))?;
    if normalize {
        ds.graph = ds.graph.row_normalized();
    }
    Ok(ds)
}

/// Splits come from the dataset when it carries them, otherwise they are
/// drawn with `seed`.
pub fn prepare(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<Prepared> {
    let g = &ds.graph;
    match cfg.task {
        TaskKind::NodeClassification => {
            let split = match &ds.splits.node {
                Some(s) => s.clone(),
                None => {
                    let s = &cfg.node_splits;
                    make_node_splits(g, s.per_class, s.num_val, s.num_test, seed)?
                }
            };
            let task = Task::Node(NodeTask::new(g, split.train, split.val, split.test)?);
            let dims = GcnDims::new(g.num_features(), cfg.hidden, g.num_classes());
            Ok(Prepared {
                graph: g.clone(),
                task,
                dims,
            })
        }
        TaskKind::LinkPrediction => {
            let split = match &ds.splits.link {
                Some(s) => s.clone(),
                None => make_link_splits(g, seed)?,
            };
            let graph = g.with_edges(split.train.clone())?;
            let task = Task::Link(LinkTask::new(
                g.num_nodes(),
                split.train,
                (split.val_pos, split.val_neg),
                (split.test_pos, split.test_neg),
            )?);
            let dims = GcnDims::new(g.num_features(), cfg.hidden, cfg.link_dim);
            Ok(Prepared { graph, task, dims })
        }
    }
}

fn dense_row(method: &str, seed: u64, p: &Prepared, val: f64, test: f64, started: Instant) -> ResultRow {
    let [(a, b), (c, d)] = p.dims.layers();
    ResultRow {
        method: method.into(),
        seed,
        round: 0,
        graph_sparsity: 0.0,
        weight_sparsity: 0.0,
        macs: macs_for_counts(p.graph.num_nodes(), p.graph.num_edges(), [a * b, c * d], p.dims).total,
        val_metric: val,
        test_metric: test,
        wall_seconds: started.elapsed().as_secs_f64(),
    }
}

fn run_seed(cfg: &ExperimentConfig, ds: &Dataset, seed: u64, mode: Mode, out: &Path) -> Result<Vec<ResultRow>> {
    let p = prepare(cfg, ds, seed)?;
    let params = GcnParams::<f32>::init(p.dims, cfg.bias, seed)?;
    let ugs = UgsConfig {
        seed,
        ..cfg.glt.ugs.clone()
    };
    let glt_cfg = glt_core::glt::GltConfig {
        ugs: ugs.clone(),
        ..cfg.glt.clone()
    };
    let started = Instant::now();
    let mut rows = Vec::new();
    match mode {
        Mode::Dense => {
            let r = train_dense(&GraphInputs::new(&p.graph), params.snapshot(), &ugs, &p.task)?;
            rows.push(dense_row("dense", seed, &p, r.best_val, r.test_at_best, started));
            let trained = GcnParams::from_parts(r.weights.clone(), params.snapshot().clone())?;
            save_model(&out.join(format!("model_seed{seed}.ckpt")), &trained, None, None)?;
            write_log_tsv(&out.join(format!("log_seed{seed}.tsv")), &r.log)?;
        }
        Mode::Ugs => {
            let inputs = GraphInputs::new(&p.graph);
            let r = ugs_round(
                &inputs,
                params.snapshot(),
                &EdgeMask::ones(p.graph.num_edges()),
                &WeightMask::ones(p.dims),
                &ugs,
                &p.task,
            )?;
            let (em, wm) = threshold_masks(&r.edge_mask, &r.weight_mask, ugs.p_g, ugs.p_theta, ugs.survivors)?;
            let alive_w = [wm.layer_alive_count(0), wm.layer_alive_count(1)];
            rows.push(ResultRow {
                method: "ugs".into(),
                seed,
                round: 1,
                graph_sparsity: 1.0 - em.alive_count() as f64 / em.len().max(1) as f64,
                weight_sparsity: wm.sparsity(),
                macs: macs_for_counts(p.graph.num_nodes(), em.alive_count(), alive_w, p.dims).total,
                val_metric: r.best_val,
                test_metric: r.test_at_best,
                wall_seconds: started.elapsed().as_secs_f64(),
            });
            let trained = GcnParams::from_parts(r.weights.clone(), params.snapshot().clone())?;
            save_model(&out.join(format!("model_seed{seed}.ckpt")), &trained, Some(&em), Some(&wm))?;
            write_log_tsv(&out.join(format!("log_seed{seed}.tsv")), &r.log)?;
        }
        Mode::Glt | Mode::RandomGlt => {
            let report = find_glt(&p.graph, &params, &glt_cfg, &p.task)?;
            rows.extend(rows_from_report("glt", seed, &report));
            write_ticket_report(out, &format!("ticket_seed{seed}"), "glt", seed, &report, &params)?;
            if mode == Mode::RandomGlt {
                rows.push(random_glt_row(&p, &report, cfg.bias, &ugs, seed)?);
            }
        }
        Mode::RandomPrune => {
            let total_w = p.dims.layers().iter().map(|(a, b)| a * b).sum();
            let targets = schedule_alive_counts(p.graph.num_edges(), total_w, &glt_cfg);
            let report = random_prune_series(&p.graph, &params, &targets, &ugs, &p.task, seed ^ RANDOM_PRUNE_SALT)?;
            rows.extend(rows_from_report("random-prune", seed, &report));
        }
        Mode::Analyze => bail!("mode `analyze` has its own subcommand: glt analyze --dataset DIR"),
    }
    Ok(rows)
}

fn random_glt_row(p: &Prepared, report: &TicketReport, bias: bool, ugs: &UgsConfig, seed: u64) -> Result<ResultRow> {
    let started = Instant::now();
    let ticket = report.final_ticket();
    let r = random_reinit_ticket::<f32>(&p.graph, ticket, p.dims, bias, ugs, &p.task, seed ^ RANDOM_GLT_SALT)?;
    let last = report.records.last().expect("report holds the dense round");
    Ok(ResultRow {
        method: "random-glt".into(),
        seed,
        round: last.round,
        graph_sparsity: last.graph_sparsity,
        weight_sparsity: last.weight_sparsity,
        macs: last.macs,
        val_metric: r.best_val,
        test_metric: r.test_at_best,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

fn sweep_seed(cfg: &ExperimentConfig, ds: &Dataset, seed: u64, out: &Path) -> Result<Vec<ResultRow>> {
    let p = prepare(cfg, ds, seed)?;
    let params = GcnParams::<f32>::init(p.dims, cfg.bias, seed)?;
    let ugs = UgsConfig {
        seed,
        ..cfg.glt.ugs.clone()
    };
    let glt_cfg = glt_core::glt::GltConfig {
        ugs: ugs.clone(),
        ..cfg.glt.clone()
    };
    let report = find_glt(&p.graph, &params, &glt_cfg, &p.task)?;
    write_ticket_report(out, &format!("ticket_seed{seed}"), "glt", seed, &report, &params)?;
    let mut rows = rows_from_report("glt", seed, &report);
    let random = random_prune_series(
        &p.graph,
        &params,
        &report.alive_counts(),
        &ugs,
        &p.task,
        seed ^ RANDOM_PRUNE_SALT,
    )?;
    rows.extend(rows_from_report("random-prune", seed, &random));
    rows.push(random_glt_row(&p, &report, cfg.bias, &ugs, seed)?);
    Ok(rows)
}

/// Runs `cfg.mode` (or the sweep) for every seed. `results.csv` is rewritten
/// after each seed so a failure leaves the completed seeds on disk.
pub fn run(cfg: &ExperimentConfig, sweep: bool) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let out = &cfg.output;
    fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let text = toml::to_string(cfg)?;
    fs::write(out.join("config.toml"), text).with_context(|| format!("cannot write into {}", out.display()))?;
    let ds = load_dataset(&cfg.dataset, cfg.normalize_features)?;
    let csv = out.join("results.csv");
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        log::info!("seed {seed}");
        let res = if sweep {
            sweep_seed(cfg, &ds, seed, out)
        } else {
            run_seed(cfg, &ds, seed, cfg.mode, out)
        };
        match res {
            Ok(r) => rows.extend(r),
            Err(e) => {
                write_results_csv(&csv, &rows)?;
                return Err(e.context(format!("seed {seed} failed")));
            }
        }
        write_results_csv(&csv, &rows)?;
    }
    let summary = summarize(&rows, cfg);
    fs::write(out.join("summary.txt"), &summary).with_context(|| format!("cannot write into {}", out.display()))?;
    print!("{summary}");
    Ok(rows)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per method and round: sparsities and the median, min and max test metric
/// across seeds.
pub fn summarize(rows: &[ResultRow], cfg: &ExperimentConfig) -> String {
    let metric = match cfg.task {
        TaskKind::NodeClassification => "accuracy",
        TaskKind::LinkPrediction => "roc-auc",
    };
    let mut groups: BTreeMap<(&str, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.as_str(), r.round)).or_default().push(r);
    }
    let mut s = format!(
        "dataset {}  seeds {:?}  hidden {}\n{:<13} {:>5} {:>8} {:>8} {:>14} {:>8} {:>8} {:>8}\n",
        cfg.dataset.display(),
        cfg.seeds,
        cfg.hidden,
        "method",
        "round",
        "graph%",
        "weight%",
        "MACs",
        metric,
        "min",
        "max"
    );
    for ((method, round), g) in groups {
        let tests: Vec<f64> = g.iter().map(|r| r.test_metric).collect();
        let lo = tests.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tests.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        writeln!(
            s,
            "{:<13} {:>5} {:>8.2} {:>8.2} {:>14} {:>8.4} {:>8.4} {:>8.4}",
            method,
            round,
            100.0 * g[0].graph_sparsity,
            100.0 * g[0].weight_sparsity,
            g[0].macs,
            median(tests),
            lo,
            hi
        )
        .expect("writing to a String");
    }
    s
}

/// Graph statistics of a dataset, or of a ticket's subgraph when `ticket`
/// names a checkpoint whose edge bitmap indexes `graph`'s edges.
pub fn analyze(graph: &Graph, ticket: Option<&Path>, betweenness: bool) -> Result<String> {
    let mut doc = toml::Table::new();
    let mut describe = |key: &str, g: &Graph| -> Result<()> {
        let mut t = toml::Table::new();
        t.insert("nodes".into(), (g.num_nodes() as i64).into());
        t.insert("edges".into(), (g.num_edges() as i64).into());
        if betweenness {
            let m = graph_measures(g);
            t.insert("avg_clustering".into(), m.avg_clustering.into());
            t.insert("avg_node_betweenness".into(), m.avg_node_betweenness.into());
            t.insert("avg_edge_betweenness".into(), m.avg_edge_betweenness.into());
        } else {
            t.insert("avg_clustering".into(), glt_core::analysis::avg_clustering(g).into());
        }
        doc.insert(key.into(), t.into());
        Ok(())
    };
    describe("graph", graph)?;
    if let Some(path) = ticket {
        let loaded = glt_core::checkpoint::load_model(path)?;
        let dims = loaded.params.dims();
        let em = loaded
            .edge_mask
            .with_context(|| format!("{} holds no edge mask", path.display()))?;
        if em.len() != graph.num_edges() {
            bail!(
                "{} masks {} edges but the graph has {} (link tickets need the same --task and --seed as the search)",
                path.display(),
                em.len(),
                graph.num_edges()
            );
        }
        let sub = glt_core::graph::remove_pruned_edges(graph, &em)?;
        describe("ticket", &sub)?;
        let wm = loaded
            .weight_mask
            .with_context(|| format!("{} holds no weight mask", path.display()))?;
        let dense = macs_for_counts(graph.num_nodes(), graph.num_edges(), dims.layers().map(|(a, b)| a * b), dims);
        let sparse = macs_for_counts(
            graph.num_nodes(),
            sub.num_edges(),
            [wm.layer_alive_count(0), wm.layer_alive_count(1)],
            dims,
        );
        let mut t = toml::Table::new();
        t.insert("dense".into(), (dense.total as i64).into());
        t.insert("ticket".into(), (sparse.total as i64).into());
        t.insert("ratio".into(), (sparse.total as f64 / dense.total as f64).into());
        doc.insert("macs".into(), t.into());
    }
    Ok(toml::to_string(&doc)?)
}
