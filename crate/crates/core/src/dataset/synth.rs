use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{make_node_splits, Dataset, SplitSpec};
use crate::error::{GltError, Result};
use crate::graph::Graph;

/// Stochastic block model with class-indicative Gaussian features. Node `v`
/// belongs to class `v % classes`; feature `k` has mean 1 for the class
/// `k % classes` and 0 otherwise, plus `N(0, noise^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub nodes: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub noise: f64,
}

impl Default for SbmParams {
    fn default() -> Self {
        SbmParams {
            nodes: 200,
            classes: 4,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            noise: 1.0,
        }
    }
}

/// Samples an SBM graph. The node split puts a fifth of each class in
/// training and halves the remainder between validation and test.
pub fn synth_sbm(params: &SbmParams, seed: u64) -> Result<Dataset> {
    let SbmParams {
        nodes: n,
        classes,
        p_in,
        p_out,
        feature_dim,
        noise,
    } = *params;
    if p_in <= p_out || !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) {
        return Err(GltError::Config(format!("need 0 <= p_out < p_in <= 1, got p_in {p_in}, p_out {p_out}")));
    }
    if classes == 0 || n < classes || feature_dim == 0 {
        return Err(GltError::Config(format!(
            "need at least one node per class and one feature ({n} nodes, {classes} classes, {feature_dim} features)"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(GltError::Config(format!("noise {noise} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let class = |v: usize| v % classes;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if class(i) == class(j) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let normal = Normal::new(0.0, noise).expect("validated noise");
    let mut features = Vec::with_capacity(n * feature_dim);
    for v in 0..n {
        for k in 0..feature_dim {
            let mean = if k % classes == class(v) { 1.0 } else { 0.0 };
            features.push((mean + normal.sample(&mut rng)) as f32);
        }
    }
    let labels = (0..n).map(|v| Some(class(v))).collect();
    let graph = Graph::new(n, feature_dim, classes, features, edges, labels)?;

    let smallest = n / classes;
    let per_class = (smallest / 5).max(1);
    let rest = n - per_class * classes;
    let node = make_node_splits(&graph, per_class, rest / 2, rest - rest / 2, seed)?;
    Ok(Dataset {
        name: format!("sbm-{n}-{classes}"),
        graph,
        splits: SplitSpec {
            seed: Some(seed),
            node: Some(node),
            link: None,
        },
        cleaning: None,
    })
}
