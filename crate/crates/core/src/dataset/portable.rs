use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dataset, SplitSpec};
use crate::error::{GltError, Result};
use crate::graph::{EdgeCleaning, Graph};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub name: String,
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub features_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_edges: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped_self_loops: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped_duplicates: Option<usize>,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| GltError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GltError::io(path, e))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
        GltError::format(path, line, e.message().to_string())
    })
}

fn to_toml<T: Serialize>(value: &T, path: &Path) -> Result<String> {
    toml::to_string(value).map_err(|e| GltError::format(path, 0, e.to_string()))
}

fn features_bytes(graph: &Graph) -> Vec<u8> {
    graph.features().iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `dataset` into `dir`, creating it if needed. Edges are written in
/// sorted order.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GltError::io(dir, e))?;
    let g = &dataset.graph;
    let features = features_bytes(g);
    let meta = Meta {
        name: dataset.name.clone(),
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
        features_sha256: sha256_hex(&features),
        raw_edges: dataset.cleaning.map(|c| c.raw),
        dropped_self_loops: dataset.cleaning.map(|c| c.self_loops),
        dropped_duplicates: dataset.cleaning.map(|c| c.duplicates),
    };
    let meta_path = dir.join("meta");
    write_file(&meta_path, to_toml(&meta, &meta_path)?)?;

    let mut edges = g.edges().to_vec();
    edges.sort_unstable();
    let mut text = String::with_capacity(edges.len() * 12);
    for (i, j) in edges {
        text.push_str(&format!("{i}\t{j}\n"));
    }
    write_file(&dir.join("edges.tsv"), text)?;
    write_file(&dir.join("features.bin"), features)?;

    let mut text = String::new();
    for (v, c) in g.labels().iter().enumerate() {
        if let Some(c) = c {
            text.push_str(&format!("{v}\t{c}\n"));
        }
    }
    write_file(&dir.join("labels.tsv"), text)?;

    let splits_path = dir.join("splits");
    if dataset.splits != SplitSpec::default() {
        write_file(&splits_path, to_toml(&dataset.splits, &splits_path)?)?;
    }
    Ok(())
}

fn parse_pair(path: &Path, line_no: usize, line: &str) -> Result<(usize, usize)> {
    let mut fields = line.split('\t');
    let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(GltError::format(path, line_no, format!("expected two tab-separated integers, got {line:?}")));
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| GltError::format(path, line_no, format!("{s:?} is not a non-negative integer")))
    };
    Ok((num(a)?, num(b)?))
}

fn read_edges(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if line.is_empty() {
            continue;
        }
        let (i, j) = parse_pair(path, line_no, line)?;
        if i >= j {
            return Err(GltError::format(path, line_no, format!("edge {i} {j} is not ordered i < j")));
        }
        if j >= num_nodes {
            return Err(GltError::format(path, line_no, format!("node {j} out of range for {num_nodes} nodes")));
        }
        if edges.last().is_some_and(|&last| last >= (i, j)) {
            return Err(GltError::format(path, line_no, "edges not sorted or duplicated"));
        }
        edges.push((i, j));
    }
    Ok(edges)
}

fn read_labels(path: &Path, num_nodes: usize, num_classes: usize) -> Result<Vec<Option<usize>>> {
    let text = read_text(path)?;
    let mut labels = vec![None; num_nodes];
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if line.is_empty() {
            continue;
        }
        let (v, c) = parse_pair(path, line_no, line)?;
        if v >= num_nodes || c >= num_classes {
            return Err(GltError::format(path, line_no, format!("label {v} {c} out of range")));
        }
        if labels[v].replace(c).is_some() {
            return Err(GltError::format(path, line_no, format!("node {v} labeled twice")));
        }
    }
    Ok(labels)
}

/// Loads and validates a dataset directory, enforcing the feature checksum.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(GltError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let meta: Meta = parse_toml(&dir.join("meta"))?;
    let n = meta.num_nodes;

    let feat_path: PathBuf = dir.join("features.bin");
    let bytes = fs::read(&feat_path).map_err(|e| GltError::io(&feat_path, e))?;
    let found = sha256_hex(&bytes);
    if found != meta.features_sha256 {
        return Err(GltError::Checksum {
            path: feat_path,
            expected: meta.features_sha256,
            found,
        });
    }
    let expected_len = n * meta.num_features * 4;
    if bytes.len() != expected_len {
        return Err(GltError::format(
            &feat_path,
            0,
            format!("{} bytes, expected {expected_len}", bytes.len()),
        ));
    }
    let features = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let edges = read_edges(&dir.join("edges.tsv"), n)?;
    let labels = read_labels(&dir.join("labels.tsv"), n, meta.num_classes)?;
    let graph = Graph::new(n, meta.num_features, meta.num_classes, features, edges, labels)?;

    let splits_path = dir.join("splits");
    let splits: SplitSpec = if splits_path.exists() {
        parse_toml(&splits_path)?
    } else {
        SplitSpec::default()
    };
    splits.validate(&graph)?;
    let cleaning = meta.raw_edges.map(|raw| EdgeCleaning {
        raw,
        self_loops: meta.dropped_self_loops.unwrap_or(0),
        duplicates: meta.dropped_duplicates.unwrap_or(0),
        kept: graph.num_edges(),
    });
    Ok(Dataset {
        name: meta.name,
        graph,
        splits,
        cleaning,
    })
}
