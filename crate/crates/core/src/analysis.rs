//! Task metrics, inference cost accounting and structural graph measures.

use std::collections::VecDeque;

use crate::autodiff::{Scalar, Tensor};
use crate::error::{GltError, Result};
use crate::graph::{EdgeMask, Graph};
use crate::model::{GcnDims, WeightMask};

/// Fraction of `rows` whose argmax matches `labels`; argmax ties go to the
/// lowest class index.
pub fn accuracy<T: Scalar>(logits: &Tensor<T>, rows: &[usize], labels: &[usize]) -> Result<f64> {
    if rows.is_empty() {
        return Err(GltError::EmptySet("accuracy"));
    }
    if rows.len() != labels.len() {
        return Err(GltError::shape("accuracy", format!("{} rows, {} labels", rows.len(), labels.len())));
    }
    let mut hits = 0usize;
    for (&r, &y) in rows.iter().zip(labels) {
        if r >= logits.rows() {
            return Err(GltError::shape("accuracy", format!("row {r} of {}", logits.rows())));
        }
        if argmax(logits.row(r)) == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / rows.len() as f64)
}

pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Area under the ROC curve via the rank-sum statistic; tied scores share
/// their average rank, so each positive/negative tie counts one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(GltError::shape("roc_auc", format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(GltError::Contract("roc_auc needs both positive and negative examples".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(GltError::NonFinite { op: "roc_auc" });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares the mean rank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerMacs {
    pub in_width: usize,
    pub out_width: usize,
    pub aggregation: u64,
    pub transform: u64,
}

/// Multiply-accumulate count of one inference pass, aggregating before
/// transforming in each layer.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MacsReport {
    pub layers: Vec<LayerMacs>,
    pub aggregation_macs: u64,
    pub transform_macs: u64,
    pub total: u64,
}

/// Counts MACs for a graph of `num_nodes` nodes whose masked operator keeps
/// `alive_edges` undirected edges. Each layer costs `nnz(M) * F_in` for
/// aggregation (diagonal included) and `|V| * alive_weights` for the
/// transform.
pub fn macs_for_counts(num_nodes: usize, alive_edges: usize, alive_weights: [usize; 2], dims: GcnDims) -> MacsReport {
    let nnz = (num_nodes + 2 * alive_edges) as u64;
    let layers: Vec<LayerMacs> = dims
        .layers()
        .into_iter()
        .zip(alive_weights)
        .map(|((fin, fout), alive)| LayerMacs {
            in_width: fin,
            out_width: fout,
            aggregation: nnz * fin as u64,
            transform: num_nodes as u64 * alive as u64,
        })
        .collect();
    let aggregation_macs = layers.iter().map(|l| l.aggregation).sum();
    let transform_macs = layers.iter().map(|l| l.transform).sum();
    MacsReport {
        layers,
        aggregation_macs,
        transform_macs,
        total: aggregation_macs + transform_macs,
    }
}

pub fn macs_count<T: Scalar>(
    graph: &Graph,
    edge_mask: &EdgeMask<T>,
    weight_mask: &WeightMask<T>,
    dims: GcnDims,
) -> Result<MacsReport> {
    if edge_mask.len() != graph.num_edges() {
        return Err(GltError::shape(
            "macs_count",
            format!("edge mask of {} for {} edges", edge_mask.len(), graph.num_edges()),
        ));
    }
    if weight_mask.dims() != dims {
        return Err(GltError::shape("macs_count", format!("{:?} vs {dims:?}", weight_mask.dims())));
    }
    Ok(macs_for_counts(
        graph.num_nodes(),
        edge_mask.alive_count(),
        [weight_mask.layer_alive_count(0), weight_mask.layer_alive_count(1)],
        dims,
    ))
}

/// Mean local clustering coefficient over all nodes; nodes of degree < 2
/// contribute 0.
pub fn avg_clustering(graph: &Graph) -> f64 {
    let n = graph.num_nodes();
    if n == 0 {
        return 0.0;
    }
    let mut mark = vec![usize::MAX; n];
    let mut total = 0.0;
    for v in 0..n {
        let nbrs = graph.neighbors(v);
        let d = nbrs.len();
        if d < 2 {
            continue;
        }
        for &u in nbrs {
            mark[u] = v;
        }
        let mut links = 0usize;
        for &u in nbrs {
            links += graph.neighbors(u).iter().filter(|&&w| mark[w] == v).count();
        }
        // every neighbor-neighbor link was seen from both ends
        let triangles = links / 2;
        total += 2.0 * triangles as f64 / (d * (d - 1)) as f64;
    }
    total / n as f64
}

struct Brandes {
    node: Vec<f64>,
    edge: Vec<f64>,
}

/// Ordered-pair betweenness sums over unweighted shortest paths.
fn brandes(graph: &Graph) -> Brandes {
    let n = graph.num_nodes();
    let csr = graph.csr();
    let mut node = vec![0.0; n];
    let mut edge = vec![0.0; graph.num_edges()];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in csr.neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                }
            }
        }
        for &w in order.iter().rev() {
            for (&v, &e) in csr.neighbors(w).iter().zip(csr.incident_edges(w)) {
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                    edge[e] += c;
                    delta[v] += c;
                }
            }
            if w != s {
                node[w] += delta[w];
            }
        }
    }
    Brandes { node, edge }
}

/// Normalized node betweenness: the unordered-pair count scaled by
/// `2 / ((n-1)(n-2))`; all zeros when `n < 3`.
pub fn node_betweenness(graph: &Graph) -> Vec<f64> {
    let n = graph.num_nodes();
    if n < 3 {
        return vec![0.0; n];
    }
    // ordered pairs already double the unordered count
    let scale = 1.0 / ((n - 1) * (n - 2)) as f64;
    brandes(graph).node.into_iter().map(|b| b * scale).collect()
}

/// Normalized edge betweenness, indexed like `graph.edges()`: the
/// unordered-pair count scaled by `2 / (n(n-1))`.
pub fn edge_betweenness(graph: &Graph) -> Vec<f64> {
    let n = graph.num_nodes();
    if n < 2 {
        return vec![0.0; graph.num_edges()];
    }
    let scale = 1.0 / (n * (n - 1)) as f64;
    brandes(graph).edge.into_iter().map(|b| b * scale).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraphMeasures {
    pub avg_clustering: f64,
    pub avg_node_betweenness: f64,
    pub avg_edge_betweenness: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn graph_measures(graph: &Graph) -> GraphMeasures {
    let b = brandes(graph);
    let n = graph.num_nodes();
    let node_scale = if n < 3 { 0.0 } else { 1.0 / ((n - 1) * (n - 2)) as f64 };
    let edge_scale = if n < 2 { 0.0 } else { 1.0 / (n * (n - 1)) as f64 };
    GraphMeasures {
        avg_clustering: avg_clustering(graph),
        avg_node_betweenness: mean(&b.node) * node_scale,
        avg_edge_betweenness: mean(&b.edge) * edge_scale,
    }
}
