use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use glt_core::dataset::read_dataset;
use glt_core::report::{parse_results_csv, read_ticket_document, ResultRow};
use glt_core::ugs::prune_count;

fn glt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = glt(args);
    assert!(
        out.status.success(),
        "glt {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, nodes: usize) -> PathBuf {
    let d = dir.join("sbm");
    ok(&["synth", "-o", s(&d), "--seed", "3", "--nodes", &nodes.to_string()]);
    d
}

fn results(dir: &Path) -> Vec<ResultRow> {
    let path = dir.join("results.csv");
    parse_results_csv(&path, &std::fs::read_to_string(&path).unwrap()).unwrap()
}

#[test]
fn dense_run_writes_one_row_per_seed() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 120);
    let out = t.path().join("dense");
    ok(&["train", "-d", s(&data), "-o", s(&out), "--seeds", "5"]);
    let rows = results(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].graph_sparsity, rows[0].weight_sparsity, rows[0].round), (0.0, 0.0, 0));
    assert_eq!(rows[0].seed, 5);
    let text = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(text.starts_with("# glt-results v1\n"));
    for f in ["model_seed5.ckpt", "log_seed5.tsv", "summary.txt", "config.toml"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let log = std::fs::read_to_string(out.join("log_seed5.tsv")).unwrap();
    assert_eq!(log.lines().count(), 201);
}

#[test]
fn glt_rows_follow_the_schedule() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 120);
    let out = t.path().join("glt");
    ok(&["glt", "-d", s(&data), "-o", s(&out), "--seeds", "0,1", "--rounds", "4"]);
    let rows = results(&out);
    assert_eq!(rows.len(), 10);
    let ds = read_dataset(&data).unwrap();
    let total_w = 16 * 16 + 16 * 4;
    for seed in [0, 1] {
        let mut e = ds.graph.num_edges();
        let mut w = total_w;
        for (k, r) in rows.iter().filter(|r| r.seed == seed).enumerate() {
            assert_eq!(r.round, k);
            assert_eq!(r.graph_sparsity, 1.0 - e as f64 / ds.graph.num_edges() as f64);
            assert_eq!(r.weight_sparsity, 1.0 - w as f64 / total_w as f64);
            e -= prune_count(0.05, e);
            w -= prune_count(0.2, w);
        }
    }
    let doc = read_ticket_document(&out.join("ticket_seed1.toml")).unwrap();
    assert_eq!(doc.rounds.len(), 5);
    for r in &doc.rounds {
        assert!(out.join(&r.masks).is_file());
    }
}

#[test]
fn identical_config_gives_identical_results() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 100);
    let run = |name: &str| {
        let out = t.path().join(name);
        ok(&["glt", "-d", s(&data), "-o", s(&out), "--seeds", "2", "--rounds", "2", "--random-glt"]);
        results(&out)
            .into_iter()
            .map(|r| ResultRow { wall_seconds: 0.0, ..r })
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn sweep_matches_sparsity_grid_across_methods() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 100);
    let out = t.path().join("sweep");
    ok(&["sweep", "-d", s(&data), "-o", s(&out), "--seeds", "0,7", "--rounds", "3"]);
    let rows = results(&out);
    for seed in [0, 7] {
        let grid = |m: &str| {
            rows.iter()
                .filter(|r| r.seed == seed && r.method == m)
                .map(|r| (r.round, r.graph_sparsity, r.weight_sparsity, r.macs))
                .collect::<Vec<_>>()
        };
        assert_eq!(grid("glt").len(), 4);
        assert_eq!(grid("glt"), grid("random-prune"));
        assert_eq!(grid("random-glt"), grid("glt")[3..].to_vec());
    }
}

#[test]
fn link_task_and_config_file() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 120);
    let cfg = t.path().join("exp.toml");
    std::fs::write(
        &cfg,
        format!(
            "task = \"link-prediction\"\nmode = \"dense\"\ndataset = {:?}\noutput = {:?}\nseeds = [1]\nhidden = 16\nlink_dim = 8\n[glt.ugs]\niterations = 50\n",
            s(&data),
            s(&t.path().join("link"))
        ),
    )
    .unwrap();
    ok(&["run", "-c", s(&cfg)]);
    let rows = results(&t.path().join("link"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].test_metric > 0.5 && rows[0].test_metric <= 1.0);
    let summary = std::fs::read_to_string(t.path().join("link/summary.txt")).unwrap();
    assert!(summary.contains("roc-auc"));
}

#[test]
fn missing_dataset_names_the_path() {
    let t = tempfile::tempdir().unwrap();
    let missing = t.path().join("no-such-dataset");
    let out = glt(&["train", "-d", s(&missing), "-o", s(&t.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&missing)));
}

#[test]
fn bad_config_key_fails() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 60);
    let out = glt(&["train", "-d", s(&data), "--set", "glt.ugs.learnin_rate=0.1"]);
    assert!(!out.status.success());
    let cfg = t.path().join("c.toml");
    std::fs::write(&cfg, "hiden = 3\n").unwrap();
    let out = glt(&["train", "-d", s(&data), "-c", s(&cfg)]);
    assert!(!out.status.success());
}

#[test]
fn corrupt_features_are_reported() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 60);
    let f = data.join("features.bin");
    let mut bytes = std::fs::read(&f).unwrap();
    bytes[10] ^= 0xff;
    std::fs::write(&f, bytes).unwrap();
    let out = glt(&["train", "-d", s(&data), "-o", s(&t.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("features.bin"));
}

#[test]
fn make_splits_and_analyze() {
    let t = tempfile::tempdir().unwrap();
    let data = synth(t.path(), 80);
    ok(&["make-splits", "-d", s(&data), "--seed", "4", "--link"]);
    let ds = read_dataset(&data).unwrap();
    let link = ds.splits.link.expect("link split written");
    let m = ds.graph.num_edges();
    assert_eq!(link.test_pos.len(), m / 10);
    assert_eq!(link.val_pos.len(), m / 20);
    assert!(ds.splits.node.is_some(), "node split kept");

    let report = ok(&["analyze", "-d", s(&data)]);
    let doc: toml::Table = report.parse().unwrap();
    assert_eq!(doc["graph"]["nodes"].as_integer(), Some(80));
    assert!(doc["graph"].get("avg_edge_betweenness").is_some());
}

#[test]
fn linqs_import() {
    let t = tempfile::tempdir().unwrap();
    let content = t.path().join("toy.content");
    let cites = t.path().join("toy.cites");
    std::fs::write(&content, "p1 1 0 A\np2 0 1 B\np3 1 1 A\n").unwrap();
    std::fs::write(&cites, "p1 p2\np2 p1\np3 p3\np2 p3\np9 p1\n").unwrap();
    let out = t.path().join("toy");
    ok(&["import-linqs", "--content", s(&content), "--cites", s(&cites), "--name", "toy", "-o", s(&out)]);
    let ds = read_dataset(&out).unwrap();
    assert_eq!(ds.graph.num_nodes(), 3);
    assert_eq!(ds.graph.edges(), &[(0, 1), (1, 2)]);
    assert_eq!(ds.graph.labels(), &[Some(0), Some(1), Some(0)]);
}
