//! Graph storage, degree-normalized adjacency with self-loops, and edge masks.
//!
//! Edges are undirected and stored once as `(i, j)` with `i < j`. Everything
//! that touches an edge (mask slots, normalized entries, pruning) refers to it
//! by its position in [`Graph::edges`].

use std::collections::HashSet;

use log::warn;

use crate::autodiff::Scalar;
use crate::error::{GltError, Result};
use crate::sparse::CsrMatrix;

/// Symmetrized neighbor lists. Entry `k` of row `i` points at neighbor
/// `indices[k]` through undirected edge `edge_ids[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyCsr {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    edge_ids: Vec<usize>,
}

impl AdjacencyCsr {
    fn build(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; num_nodes];
        for &(i, j) in edges {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut indptr = vec![0usize; num_nodes + 1];
        for v in 0..num_nodes {
            indptr[v + 1] = indptr[v] + degree[v];
        }
        let mut rows: Vec<Vec<(usize, usize)>> = degree.iter().map(|&d| Vec::with_capacity(d)).collect();
        for (e, &(i, j)) in edges.iter().enumerate() {
            rows[i].push((j, e));
            rows[j].push((i, e));
        }
        let mut indices = Vec::with_capacity(2 * edges.len());
        let mut edge_ids = Vec::with_capacity(2 * edges.len());
        for mut row in rows {
            row.sort_unstable();
            for (n, e) in row {
                indices.push(n);
                edge_ids.push(e);
            }
        }
        AdjacencyCsr {
            indptr,
            indices,
            edge_ids,
        }
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.indices[self.indptr[v]..self.indptr[v + 1]]
    }

    /// Edge ids aligned with [`AdjacencyCsr::neighbors`].
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.edge_ids[self.indptr[v]..self.indptr[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.indptr[v + 1] - self.indptr[v]
    }
}

/// Attributed undirected graph with optional node labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
    features: Vec<f32>,
    edges: Vec<(usize, usize)>,
    labels: Vec<Option<usize>>,
    csr: AdjacencyCsr,
}

/// Edge counts reported by [`Graph::clean_edges`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeCleaning {
    pub raw: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub kept: usize,
}

impl Graph {
    /// Validates and assembles a graph. Edges must satisfy `i < j < num_nodes`
    /// and be unique; their order is preserved.
    pub fn new(
        num_nodes: usize,
        num_features: usize,
        num_classes: usize,
        features: Vec<f32>,
        edges: Vec<(usize, usize)>,
        labels: Vec<Option<usize>>,
    ) -> Result<Self> {
        if features.len() != num_nodes * num_features {
            return Err(GltError::shape(
                "graph",
                format!(
                    "{} feature values for {num_nodes} nodes x {num_features} features",
                    features.len()
                ),
            ));
        }
        if labels.len() != num_nodes {
            return Err(GltError::shape(
                "graph",
                format!("{} labels for {num_nodes} nodes", labels.len()),
            ));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&c| c >= num_classes) {
            return Err(GltError::Contract(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j) in &edges {
            if i >= j {
                return Err(GltError::Contract(format!("edge ({i}, {j}) is not ordered i < j")));
            }
            if j >= num_nodes {
                return Err(GltError::Contract(format!(
                    "edge ({i}, {j}) references a node >= {num_nodes}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(GltError::Contract(format!("duplicate edge ({i}, {j})")));
            }
        }
        let csr = AdjacencyCsr::build(num_nodes, &edges);
        Ok(Graph {
            num_nodes,
            num_features,
            num_classes,
            features,
            edges,
            labels,
            csr,
        })
    }

    /// Normalizes raw (possibly directed, duplicated, self-looped) pairs into
    /// sorted `i < j` undirected edges.
    pub fn clean_edges(raw: &[(usize, usize)]) -> (Vec<(usize, usize)>, EdgeCleaning) {
        let mut stats = EdgeCleaning {
            raw: raw.len(),
            ..Default::default()
        };
        let mut edges = Vec::with_capacity(raw.len());
        for &(a, b) in raw {
            if a == b {
                stats.self_loops += 1;
                continue;
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        stats.duplicates = before - edges.len();
        stats.kept = edges.len();
        if stats.self_loops > 0 || stats.duplicates > 0 {
            warn!(
                "dropped {} self-loops and {} duplicate edges ({} raw, {} kept)",
                stats.self_loops, stats.duplicates, stats.raw, stats.kept
            );
        }
        (edges, stats)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn feature_row(&self, v: usize) -> &[f32] {
        &self.features[v * self.num_features..(v + 1) * self.num_features]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn csr(&self) -> &AdjacencyCsr {
        &self.csr
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.csr.neighbors(v)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.csr.degree(v)
    }

    /// Sparse copy of the feature matrix in the requested precision.
    pub fn feature_matrix<T: Scalar>(&self) -> CsrMatrix<T> {
        let data: Vec<T> = self.features.iter().map(|&v| T::of(v as f64)).collect();
        CsrMatrix::from_dense(self.num_nodes, self.num_features, &data)
    }

    /// Copy with every feature row scaled to unit L1 norm (all-zero rows are
    /// left untouched). For nonnegative features the rows sum to one.
    pub fn row_normalized(&self) -> Graph {
        let mut out = self.clone();
        for row in out.features.chunks_mut(self.num_features.max(1)) {
            let sum: f64 = row.iter().map(|&v| (v as f64).abs()).sum();
            if sum != 0.0 {
                for v in row.iter_mut() {
                    *v = (*v as f64 / sum) as f32;
                }
            }
        }
        out
    }

    /// Same nodes and features with a different edge list.
    pub fn with_edges(&self, edges: Vec<(usize, usize)>) -> Result<Graph> {
        Graph::new(
            self.num_nodes,
            self.num_features,
            self.num_classes,
            self.features.clone(),
            edges,
            self.labels.clone(),
        )
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes;
        if perm.len() != n {
            return Err(GltError::shape("permute", format!("{} entries for {n} nodes", perm.len())));
        }
        let mut features = vec![0f32; self.features.len()];
        let mut labels = vec![None; n];
        for v in 0..n {
            let p = perm[v];
            features[p * self.num_features..(p + 1) * self.num_features]
                .copy_from_slice(self.feature_row(v));
            labels[p] = self.labels[v];
        }
        let edges = self
            .edges
            .iter()
            .map(|&(i, j)| {
                let (a, b) = (perm[i], perm[j]);
                (a.min(b), a.max(b))
            })
            .collect();
        Graph::new(n, self.num_features, self.num_classes, features, edges, labels)
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormAdjacency<T> {
    matrix: CsrMatrix<T>,
    edge_slot: Vec<Option<usize>>,
    num_edges: usize,
}

impl<T: Scalar> NormAdjacency<T> {
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    /// Undirected edge behind each stored entry; `None` on the diagonal.
    pub fn edge_slots(&self) -> &[Option<usize>] {
        &self.edge_slot
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.n_rows()
    }

    /// Entry values scaled by the edge mask; diagonal entries untouched.
    pub fn masked_values(&self, mask: &EdgeMask<T>) -> Result<Vec<T>> {
        if mask.len() != self.num_edges {
            return Err(GltError::shape(
                "apply_edge_mask",
                format!("mask has {} slots, adjacency has {} edges", mask.len(), self.num_edges),
            ));
        }
        Ok(self
            .matrix
            .values()
            .iter()
            .zip(&self.edge_slot)
            .map(|(&v, slot)| match slot {
                Some(e) => v * mask.values[*e],
                None => v,
            })
            .collect())
    }
}

pub fn normalize_adjacency<T: Scalar>(graph: &Graph) -> NormAdjacency<T> {
    let n = graph.num_nodes();
    let deg: Vec<f64> = (0..n).map(|v| graph.degree(v) as f64 + 1.0).collect();
    let mut triplets = Vec::with_capacity(n + 2 * graph.num_edges());
    for v in 0..n {
        triplets.push((v, v, T::of(1.0 / deg[v])));
    }
    for &(i, j) in graph.edges() {
        // one scalar for both orientations keeps the operator exactly symmetric
        let w = T::of(1.0 / (deg[i] * deg[j]).sqrt());
        triplets.push((i, j, w));
        triplets.push((j, i, w));
    }
    let matrix = CsrMatrix::from_triplets(n, n, triplets)
        .expect("validated graph yields unique in-range entries");
    let mut edge_slot = vec![None; matrix.nnz()];
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        for (r, c) in [(i, j), (j, i)] {
            let k = matrix.find(r, c).expect("edge entry present");
            edge_slot[k] = Some(e);
        }
    }
    NormAdjacency {
        matrix,
        edge_slot,
        num_edges: graph.num_edges(),
    }
}

/// Non-differentiable [`NormAdjacency`] with the edge mask applied.
pub fn apply_edge_mask<T: Scalar>(norm: &NormAdjacency<T>, mask: &EdgeMask<T>) -> Result<CsrMatrix<T>> {
    norm.matrix.with_values(norm.masked_values(mask)?)
}

/// One continuous value and one liveness flag per undirected edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMask<T> {
    pub values: Vec<T>,
    pub alive: Vec<bool>,
}

impl<T: Scalar> EdgeMask<T> {
    pub fn ones(num_edges: usize) -> Self {
        EdgeMask {
            values: vec![T::one(); num_edges],
            alive: vec![true; num_edges],
        }
    }

    pub fn from_alive(alive: Vec<bool>) -> Self {
        let values = alive.iter().map(|&a| if a { T::one() } else { T::zero() }).collect();
        EdgeMask { values, alive }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    /// Mean absolute value over live slots.
    pub fn mean_abs(&self) -> f64 {
        mean_abs_alive(&self.values, &self.alive)
    }

    /// Restricts the mask to its live slots, in order.
    pub fn compacted(&self) -> EdgeMask<T> {
        let mut out = EdgeMask {
            values: Vec::new(),
            alive: Vec::new(),
        };
        for (&v, &a) in self.values.iter().zip(&self.alive) {
            if a {
                out.values.push(v);
                out.alive.push(true);
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> EdgeMask<U> {
        EdgeMask {
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            alive: self.alive.clone(),
        }
    }
}

pub(crate) fn mean_abs_alive<T: Scalar>(values: &[T], alive: &[bool]) -> f64 {
    let (sum, count) = values
        .iter()
        .zip(alive)
        .filter(|(_, &a)| a)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v.as_f64().abs(), c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Graph with only the live edges of `mask`, order preserved.
pub fn remove_pruned_edges<T: Scalar>(graph: &Graph, mask: &EdgeMask<T>) -> Result<Graph> {
    if mask.len() != graph.num_edges() {
        return Err(GltError::shape(
            "remove_pruned_edges",
            format!("mask has {} slots for {} edges", mask.len(), graph.num_edges()),
        ));
    }
    let edges = graph
        .edges()
        .iter()
        .zip(&mask.alive)
        .filter(|(_, &a)| a)
        .map(|(&e, _)| e)
        .collect();
    graph.with_edges(edges)
}

/// Fraction of permanently pruned slots.
pub fn graph_sparsity<T: Scalar>(mask: &EdgeMask<T>) -> Result<f64> {
    if mask.is_empty() {
        return Err(GltError::EmptySet("graph_sparsity"));
    }
    Ok(1.0 - mask.alive_count() as f64 / mask.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bare(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        Graph::new(n, 1, 1, vec![1.0; n], edges, vec![None; n]).unwrap()
    }

    fn dense(norm: &NormAdjacency<f64>) -> Vec<f64> {
        norm.matrix().to_dense()
    }

    #[test]
    fn single_node_self_loop_only() {
        let a = normalize_adjacency::<f64>(&bare(1, vec![]));
        assert_eq!(dense(&a), vec![1.0]);
    }

    #[test]
    fn two_nodes_all_half() {
        let a = normalize_adjacency::<f64>(&bare(2, vec![(0, 1)]));
        assert_eq!(dense(&a), vec![0.5; 4]);
    }

    #[test]
    fn three_node_path() {
        let a = normalize_adjacency::<f64>(&bare(3, vec![(0, 1), (1, 2)]));
        let d = dense(&a);
        assert_relative_eq!(d[1], 1.0 / 6f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(d[1], 0.408248290463863, epsilon = 1e-12);
        assert_eq!(d[0], 0.5);
        assert_relative_eq!(d[4], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn edge_mask_application() {
        let a = normalize_adjacency::<f64>(&bare(2, vec![(0, 1)]));
        let ones = apply_edge_mask(&a, &EdgeMask::ones(1)).unwrap();
        assert_eq!(&ones, a.matrix());

        let zeros = EdgeMask { values: vec![0.0], alive: vec![true] };
        assert_eq!(apply_edge_mask(&a, &zeros).unwrap().to_dense(), vec![0.5, 0.0, 0.0, 0.5]);

        let half = EdgeMask { values: vec![0.5], alive: vec![true] };
        assert_eq!(apply_edge_mask(&a, &half).unwrap().to_dense(), vec![0.5, 0.25, 0.25, 0.5]);

        assert!(apply_edge_mask(&a, &EdgeMask::<f64>::ones(2)).is_err());
    }

    #[test]
    fn pruned_edge_removal() {
        let g = bare(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        let all = remove_pruned_edges(&g, &EdgeMask::<f32>::ones(4)).unwrap();
        assert_eq!(all.edges(), g.edges());

        let none = remove_pruned_edges(&g, &EdgeMask::<f32>::from_alive(vec![false; 4])).unwrap();
        assert!(none.edges().is_empty());
        assert_eq!(none.num_nodes(), 5);

        let some =
            remove_pruned_edges(&g, &EdgeMask::<f32>::from_alive(vec![true, false, true, false]))
                .unwrap();
        assert_eq!(some.edges(), &[(0, 1), (2, 3)]);
        assert_eq!(some.features(), g.features());
    }

    #[test]
    fn sparsity_fraction() {
        assert_eq!(graph_sparsity(&EdgeMask::<f32>::ones(100)).unwrap(), 0.0);
        assert_eq!(graph_sparsity(&EdgeMask::<f32>::from_alive(vec![false; 100])).unwrap(), 1.0);
        assert!(graph_sparsity(&EdgeMask::<f32>::ones(0)).is_err());
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(Graph::new(3, 1, 1, vec![0.0; 3], vec![(1, 0)], vec![None; 3]).is_err());
        assert!(Graph::new(3, 1, 1, vec![0.0; 3], vec![(1, 1)], vec![None; 3]).is_err());
        assert!(Graph::new(3, 1, 1, vec![0.0; 3], vec![(0, 1), (0, 1)], vec![None; 3]).is_err());
        assert!(Graph::new(3, 1, 1, vec![0.0; 3], vec![(0, 3)], vec![None; 3]).is_err());
        assert!(Graph::new(3, 1, 1, vec![0.0; 2], vec![], vec![None; 3]).is_err());
        assert!(Graph::new(3, 1, 2, vec![0.0; 3], vec![], vec![Some(2), None, None]).is_err());
    }

    #[test]
    fn clean_edges_counts() {
        let (edges, stats) = Graph::clean_edges(&[(3, 1), (1, 3), (2, 2), (0, 1)]);
        assert_eq!(edges, vec![(0, 1), (1, 3)]);
        assert_eq!(stats, EdgeCleaning { raw: 4, self_loops: 1, duplicates: 1, kept: 2 });
    }
}
