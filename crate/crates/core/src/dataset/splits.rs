use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GltError, Result};
use crate::graph::Graph;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Edge partition for link prediction. `train` edges form the message
/// passing graph; the negatives are fixed absent pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSplit {
    pub train: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeSplit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSplit>,
}

fn disjoint<T: Copy + Eq + std::hash::Hash + std::fmt::Debug>(sets: &[(&str, &[T])]) -> Result<()> {
    let mut seen: HashSet<T> = HashSet::new();
    for (name, set) in sets {
        for &x in *set {
            if !seen.insert(x) {
                return Err(GltError::Contract(format!("split entry {x:?} repeated (seen again in {name})")));
            }
        }
    }
    Ok(())
}

impl SplitSpec {
    /// Checks ranges, disjointness and, for link splits, that held-out
    /// pairs are absent from the training edges.
    pub fn validate(&self, graph: &Graph) -> Result<()> {
        let n = graph.num_nodes();
        if let Some(s) = &self.node {
            if let Some(&v) = s.train.iter().chain(&s.val).chain(&s.test).find(|&&v| v >= n) {
                return Err(GltError::Contract(format!("split node {v} out of range for {n} nodes")));
            }
            disjoint(&[("train", &s.train), ("val", &s.val), ("test", &s.test)])?;
        }
        if let Some(s) = &self.link {
            let all = [
                ("train", &s.train),
                ("val_pos", &s.val_pos),
                ("val_neg", &s.val_neg),
                ("test_pos", &s.test_pos),
                ("test_neg", &s.test_neg),
            ];
            for (name, pairs) in all {
                if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u >= v || v >= n) {
                    return Err(GltError::Contract(format!("{name} pair ({u}, {v}) invalid for {n} nodes")));
                }
            }
            disjoint(&all.map(|(name, p)| (name, p.as_slice())))?;
        }
        Ok(())
    }
}

/// Class-balanced training nodes (`per_class` of each class), then
/// `num_val` and `num_test` further labeled nodes, all drawn at random.
pub fn make_node_splits(
    graph: &Graph,
    per_class: usize,
    num_val: usize,
    num_test: usize,
    seed: u64,
) -> Result<NodeSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labeled: Vec<usize> = (0..graph.num_nodes()).filter(|&v| graph.labels()[v].is_some()).collect();
    labeled.shuffle(&mut rng);
    let mut taken = vec![0usize; graph.num_classes()];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for v in labeled {
        let c = graph.labels()[v].expect("filtered");
        if taken[c] < per_class {
            taken[c] += 1;
            train.push(v);
        } else {
            rest.push(v);
        }
    }
    if let Some(c) = taken.iter().position(|&t| t < per_class) {
        return Err(GltError::Contract(format!("class {c} has fewer than {per_class} labeled nodes")));
    }
    if rest.len() < num_val + num_test {
        return Err(GltError::Contract(format!(
            "{} labeled nodes left for {num_val} validation and {num_test} test nodes",
            rest.len()
        )));
    }
    let mut val = rest[..num_val].to_vec();
    let mut test = rest[num_val..num_val + num_test].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(NodeSplit { train, val, test })
}

/// 85/5/10 partition of the edges with one fixed negative pair per held-out
/// positive, drawn uniformly from node pairs that are not edges.
pub fn make_link_splits(graph: &Graph, seed: u64) -> Result<LinkSplit> {
    let m = graph.num_edges();
    if m < 20 {
        return Err(GltError::Contract(format!("link splits need at least 20 edges, graph has {m}")));
    }
    let n = graph.num_nodes();
    let n_test = m / 10;
    let n_val = m / 20;
    let absent = n * (n - 1) / 2 - m;
    if absent < n_test + n_val {
        return Err(GltError::Contract("graph too dense to sample held-out negatives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let pick = |idx: &[usize]| {
        let mut e: Vec<(usize, usize)> = idx.iter().map(|&k| graph.edges()[k]).collect();
        e.sort_unstable();
        e
    };
    let test_pos = pick(&order[..n_test]);
    let val_pos = pick(&order[n_test..n_test + n_val]);
    let train = pick(&order[n_test + n_val..]);

    let edges: HashSet<(usize, usize)> = graph.edges().iter().copied().collect();
    let mut used = HashSet::new();
    let mut draw = |count: usize, rng: &mut ChaCha8Rng| {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            let pair = (u.min(v), u.max(v));
            if u != v && !edges.contains(&pair) && used.insert(pair) {
                out.push(pair);
            }
        }
        out.sort_unstable();
        out
    };
    let val_neg = draw(n_val, &mut rng);
    let test_neg = draw(n_test, &mut rng);
    Ok(LinkSplit {
        train,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}
