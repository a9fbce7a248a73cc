//! One round of joint edge/weight mask training followed by magnitude
//! thresholding.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{accuracy, roc_auc};
use crate::autodiff::{Scalar, Tape, Var};
use crate::error::{GltError, Result};
use crate::graph::{EdgeMask, Graph};
use crate::model::{forward, forward_with_features, link_score, predict, Dropout, GradFlags, GraphInputs, WeightMask, Weights};
use crate::optim::{Adam, AdamConfig};
use crate::sparse::CsrMatrix;

/// Supervised node classification on a fixed split.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeTask {
    pub train: Vec<usize>,
    pub train_labels: Vec<usize>,
    pub val: Vec<usize>,
    pub val_labels: Vec<usize>,
    pub test: Vec<usize>,
    pub test_labels: Vec<usize>,
}

impl NodeTask {
    /// Looks up labels of the split nodes; every split node must be labeled.
    pub fn new(graph: &Graph, train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        let lookup = |set: &[usize], name: &str| -> Result<Vec<usize>> {
            set.iter()
                .map(|&v| {
                    graph
                        .labels()
                        .get(v)
                        .copied()
                        .flatten()
                        .ok_or_else(|| GltError::Contract(format!("{name} node {v} has no label")))
                })
                .collect()
        };
        if train.is_empty() || val.is_empty() || test.is_empty() {
            return Err(GltError::EmptySet("node split"));
        }
        Ok(NodeTask {
            train_labels: lookup(&train, "train")?,
            val_labels: lookup(&val, "val")?,
            test_labels: lookup(&test, "test")?,
            train,
            val,
            test,
        })
    }
}

/// Link prediction: message passing runs on the training edges only, which
/// are also the positives of the loss. Each iteration draws one fresh
/// negative pair per positive.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkTask {
    pub num_nodes: usize,
    pub train_pos: Vec<(usize, usize)>,
    pub val_pairs: Vec<(usize, usize)>,
    pub val_labels: Vec<bool>,
    pub test_pairs: Vec<(usize, usize)>,
    pub test_labels: Vec<bool>,
    train_set: HashSet<(usize, usize)>,
}

impl LinkTask {
    pub fn new(
        num_nodes: usize,
        train_pos: Vec<(usize, usize)>,
        (val_pos, val_neg): (Vec<(usize, usize)>, Vec<(usize, usize)>),
        (test_pos, test_neg): (Vec<(usize, usize)>, Vec<(usize, usize)>),
    ) -> Result<Self> {
        if num_nodes < 2 || train_pos.is_empty() {
            return Err(GltError::EmptySet("link task"));
        }
        let labeled = |pos: Vec<(usize, usize)>, neg: Vec<(usize, usize)>| {
            let labels = std::iter::repeat_n(true, pos.len()).chain(std::iter::repeat_n(false, neg.len())).collect();
            (pos.into_iter().chain(neg).collect::<Vec<_>>(), labels)
        };
        let (val_pairs, val_labels) = labeled(val_pos, val_neg);
        let (test_pairs, test_labels) = labeled(test_pos, test_neg);
        let train_set = train_pos.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        Ok(LinkTask {
            num_nodes,
            train_pos,
            val_pairs,
            val_labels,
            test_pairs,
            test_labels,
            train_set,
        })
    }

    /// Uniform node pair that is neither a self pair nor a training edge.
    fn sample_negative(&self, rng: &mut impl Rng) -> (usize, usize) {
        loop {
            let u = rng.random_range(0..self.num_nodes);
            let v = rng.random_range(0..self.num_nodes);
            if u != v && !self.train_set.contains(&(u.min(v), u.max(v))) {
                return (u, v);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Node(NodeTask),
    Link(LinkTask),
}

impl Task {
    pub fn metric_name(&self) -> &'static str {
        match self {
            Task::Node(_) => "accuracy",
            Task::Link(_) => "roc_auc",
        }
    }
}

/// What happens to surviving mask values after thresholding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Survivors {
    /// Reset to 1.
    #[default]
    Rearm,
    /// Keep their trained values.
    Carry,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UgsConfig {
    pub iterations: usize,
    pub lr: f64,
    pub mask_lr_g: f64,
    pub mask_lr_theta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub weight_decay: f64,
    pub p_g: f64,
    pub p_theta: f64,
    pub dropout: f64,
    pub input_dropout: f64,
    pub survivors: Survivors,
    pub seed: u64,
}

impl Default for UgsConfig {
    fn default() -> Self {
        UgsConfig {
            iterations: 200,
            lr: 8e-3,
            mask_lr_g: 8e-3,
            mask_lr_theta: 8e-3,
            gamma1: 1e-2,
            gamma2: 1e-2,
            weight_decay: 8e-5,
            p_g: 0.05,
            p_theta: 0.2,
            dropout: 0.5,
            input_dropout: 0.5,
            survivors: Survivors::Rearm,
            seed: 0,
        }
    }
}

impl UgsConfig {
    /// Desk defaults for the link task on Cora-sized graphs.
    pub fn link_prediction() -> Self {
        UgsConfig {
            lr: 1e-2,
            mask_lr_g: 1e-2,
            mask_lr_theta: 1e-2,
            gamma1: 1e-4,
            gamma2: 1e-4,
            weight_decay: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GltError::Config(msg));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        for (name, p) in [("p_g", self.p_g), ("p_theta", self.p_theta)] {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("{name} = {p} must lie in (0, 1)"));
            }
        }
        for (name, r) in [("lr", self.lr), ("mask_lr_g", self.mask_lr_g), ("mask_lr_theta", self.mask_lr_theta)] {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("{name} = {r} must be positive"));
            }
        }
        for (name, r) in [("gamma1", self.gamma1), ("gamma2", self.gamma2), ("weight_decay", self.weight_decay)] {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("{name} = {r} must be non-negative"));
            }
        }
        for (name, r) in [("dropout", self.dropout), ("input_dropout", self.input_dropout)] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} = {r} must lie in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// One line of the per-iteration training log.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub test_metric: f64,
    pub mean_abs_mg: f64,
    pub mean_abs_mtheta: f64,
}

impl IterationLog {
    pub const HEADER: &'static str = "iteration\ttrain_loss\tval_metric\ttest_metric\tmean_abs_mg\tmean_abs_mtheta";

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.iteration, self.train_loss, self.val_metric, self.test_metric, self.mean_abs_mg, self.mean_abs_mtheta
        )
    }
}

/// State at the best-validation iteration of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult<T> {
    pub weights: Weights<T>,
    pub edge_mask: EdgeMask<T>,
    pub weight_mask: WeightMask<T>,
    pub best_val: f64,
    pub best_iteration: usize,
    pub test_at_best: f64,
    pub log: Vec<IterationLog>,
}

/// Validation and test metric of the current model.
pub fn evaluate<T: Scalar>(
    inputs: &GraphInputs<T>,
    edge_mask: &EdgeMask<T>,
    weights: &Weights<T>,
    weight_mask: &WeightMask<T>,
    task: &Task,
) -> Result<(f64, f64)> {
    let out = predict(inputs, edge_mask, weights, weight_mask)?;
    match task {
        Task::Node(t) => Ok((accuracy(&out, &t.val, &t.val_labels)?, accuracy(&out, &t.test, &t.test_labels)?)),
        Task::Link(t) => Ok((
            roc_auc(&link_score(&out, &t.val_pairs)?, &t.val_labels)?,
            roc_auc(&link_score(&out, &t.test_pairs)?, &t.test_labels)?,
        )),
    }
}

fn task_loss<T: Scalar>(tape: &mut Tape<'_, T>, out: Var, task: &Task, rng: &mut ChaCha8Rng) -> Result<Var> {
    match task {
        Task::Node(t) => tape.softmax_cross_entropy(out, &t.train, &t.train_labels),
        Task::Link(t) => {
            let mut pairs = t.train_pos.clone();
            pairs.extend((0..t.train_pos.len()).map(|_| t.sample_negative(rng)));
            let targets: Vec<T> = (0..pairs.len())
                .map(|k| if k < t.train_pos.len() { T::one() } else { T::zero() })
                .collect();
            let scores = tape.pair_dot(out, &pairs)?;
            tape.sigmoid_bce(scores, &targets)
        }
    }
}

/// Inverted dropout on the stored entries of a sparse feature matrix.
fn drop_features<T: Scalar>(x: &CsrMatrix<T>, rate: f64, rng: &mut ChaCha8Rng) -> Result<CsrMatrix<T>> {
    let scale = T::of(1.0 / (1.0 - rate));
    let values = x
        .values()
        .iter()
        .map(|&v| if rng.random::<f64>() < rate { T::zero() } else { v * scale })
        .collect();
    x.with_values(values)
}

struct Optimizers {
    theta: [Adam; 2],
    bias: [Option<Adam>; 2],
    edge: Option<Adam>,
    weight_mask: Option<[Adam; 2]>,
}

fn check_task<T: Scalar>(inputs: &GraphInputs<T>, task: &Task) -> Result<()> {
    let n = inputs.num_nodes();
    let in_range = |v: usize| v < n;
    let ok = match task {
        Task::Node(t) => t.train.iter().chain(&t.val).chain(&t.test).copied().all(in_range),
        Task::Link(t) => {
            t.num_nodes == n
                && t.train_pos
                    .iter()
                    .chain(&t.val_pairs)
                    .chain(&t.test_pairs)
                    .all(|&(u, v)| in_range(u) && in_range(v))
        }
    };
    if ok {
        Ok(())
    } else {
        Err(GltError::shape("task", format!("task refers to nodes outside a {n}-node graph")))
    }
}

/// Full-batch training loop shared by mask learning and frozen-mask
/// retraining. Returns the state at the best validation iteration (earliest
/// on ties).
fn train<T: Scalar>(
    inputs: &GraphInputs<T>,
    start: &Weights<T>,
    edge_mask: &EdgeMask<T>,
    weight_mask: &WeightMask<T>,
    config: &UgsConfig,
    task: &Task,
    learn_masks: bool,
) -> Result<RoundResult<T>> {
    config.validate()?;
    check_task(inputs, task)?;
    let mut weights = start.clone();
    let mut edge_mask = edge_mask.clone();
    let mut weight_mask = weight_mask.clone();
    let theta_cfg = AdamConfig::new(config.lr, config.weight_decay);
    let mut opt = Optimizers {
        theta: weights.theta.each_ref().map(|t| Adam::new(t.len(), theta_cfg)),
        bias: weights.bias.each_ref().map(|b| b.as_ref().map(|b| Adam::new(b.len(), theta_cfg))),
        edge: learn_masks.then(|| Adam::new(edge_mask.len(), AdamConfig::new(config.mask_lr_g, 0.0))),
        weight_mask: learn_masks.then(|| {
            weight_mask
                .values
                .each_ref()
                .map(|t| Adam::new(t.len(), AdamConfig::new(config.mask_lr_theta, 0.0)))
        }),
    };
    let grads = if learn_masks { GradFlags::ALL } else { GradFlags::WEIGHTS };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<RoundResult<T>> = None;
    let mut log = Vec::with_capacity(config.iterations);

    for iteration in 1..=config.iterations {
        let dropped = (config.input_dropout > 0.0)
            .then(|| drop_features(&inputs.features, config.input_dropout, &mut rng))
            .transpose()?;
        let mut tape = Tape::new();
        let diverged = |e: GltError| match e {
            GltError::NonFinite { .. } => GltError::Divergence { iteration, loss: f64::NAN },
            other => other,
        };
        let dropout = (config.dropout > 0.0).then(|| Dropout {
            rate: config.dropout,
            rng: &mut rng,
        });
        let vars = match &dropped {
            Some(x) => forward_with_features(&mut tape, x, &inputs.adj, &edge_mask, &weights, &weight_mask, grads, dropout),
            None => forward(&mut tape, inputs, &edge_mask, &weights, &weight_mask, grads, dropout),
        }
        .map_err(diverged)?;
        let mut loss = task_loss(&mut tape, vars.output, task, &mut rng).map_err(diverged)?;
        if learn_masks {
            let pg = tape.l1_penalty(vars.edge_mask, Some(&edge_mask.alive))?;
            let pg = tape.scale(pg, T::of(config.gamma1))?;
            let pw0 = tape.l1_penalty(vars.weight_mask[0], Some(&weight_mask.alive[0]))?;
            let pw1 = tape.l1_penalty(vars.weight_mask[1], Some(&weight_mask.alive[1]))?;
            let pw = tape.add(pw0, pw1)?;
            let pw = tape.scale(pw, T::of(config.gamma2))?;
            loss = tape.add(loss, pg)?;
            loss = tape.add(loss, pw)?;
        }
        let loss_value = tape.value(loss).item().as_f64();
        if !loss_value.is_finite() {
            return Err(GltError::Divergence { iteration, loss: loss_value });
        }
        tape.backward(loss)?;

        for l in 0..2 {
            let g = tape.grad_or_zeros(vars.theta[l]);
            let alive = &weight_mask.alive[l];
            opt.theta[l].step(weights.theta[l].as_mut_slice(), g.as_slice(), Some(alive));
            if let (Some(b), Some(o), Some(var)) = (weights.bias[l].as_mut(), opt.bias[l].as_mut(), vars.bias[l]) {
                o.step(b.as_mut_slice(), tape.grad_or_zeros(var).as_slice(), None);
            }
        }
        if let Some(o) = opt.edge.as_mut() {
            let g = tape.grad_or_zeros(vars.edge_mask);
            o.step(&mut edge_mask.values, g.as_slice(), Some(&edge_mask.alive));
        }
        if let Some(os) = opt.weight_mask.as_mut() {
            for l in 0..2 {
                let g = tape.grad_or_zeros(vars.weight_mask[l]);
                os[l].step(weight_mask.values[l].as_mut_slice(), g.as_slice(), Some(&weight_mask.alive[l]));
            }
        }
        drop(tape);

        let (val, test) = evaluate(inputs, &edge_mask, &weights, &weight_mask, task).map_err(|e| match e {
            GltError::NonFinite { .. } => GltError::Divergence { iteration, loss: loss_value },
            other => other,
        })?;
        log.push(IterationLog {
            iteration,
            train_loss: loss_value,
            val_metric: val,
            test_metric: test,
            mean_abs_mg: edge_mask.mean_abs(),
            mean_abs_mtheta: weight_mask.mean_abs(),
        });
        log::trace!("iter {iteration}: loss {loss_value:.5} val {val:.4} test {test:.4}");
        if best.as_ref().is_none_or(|b| val > b.best_val) {
            best = Some(RoundResult {
                weights: weights.clone(),
                edge_mask: edge_mask.clone(),
                weight_mask: weight_mask.clone(),
                best_val: val,
                best_iteration: iteration,
                test_at_best: test,
                log: Vec::new(),
            });
        }
    }
    let mut best = best.expect("at least one iteration");
    best.log = log;
    Ok(best)
}

/// Co-trains weights, edge mask and weight mask under the task loss plus
/// `gamma1 * |m_g|_1 + gamma2 * |m_theta|_1` over live entries. Masks are
/// returned continuous; see [`threshold_masks`].
pub fn ugs_round<T: Scalar>(
    inputs: &GraphInputs<T>,
    start: &Weights<T>,
    edge_mask: &EdgeMask<T>,
    weight_mask: &WeightMask<T>,
    config: &UgsConfig,
    task: &Task,
) -> Result<RoundResult<T>> {
    train(inputs, start, edge_mask, weight_mask, config, task, true)
}

/// Trains the weights only, with both masks held fixed and no mask penalty.
pub fn train_frozen<T: Scalar>(
    inputs: &GraphInputs<T>,
    start: &Weights<T>,
    edge_mask: &EdgeMask<T>,
    weight_mask: &WeightMask<T>,
    config: &UgsConfig,
    task: &Task,
) -> Result<RoundResult<T>> {
    train(inputs, start, edge_mask, weight_mask, config, task, false)
}

/// Number of entries removed when pruning fraction `p` of `alive` entries:
/// `floor(p * alive)`, at least one while anything is alive.
pub fn prune_count(p: f64, alive: usize) -> usize {
    if alive == 0 {
        return 0;
    }
    ((p * alive as f64 + 1e-9).floor() as usize).clamp(1, alive)
}

/// Kills the `prune_count(p, alive)` live entries of smallest magnitude,
/// ties broken by ascending index. Returns the new liveness flags.
pub fn prune_smallest<T: Scalar>(values: &[T], alive: &[bool], p: f64) -> Vec<bool> {
    let mut live: Vec<usize> = (0..values.len()).filter(|&k| alive[k]).collect();
    let count = prune_count(p, live.len());
    live.sort_by(|&a, &b| values[a].as_f64().abs().total_cmp(&values[b].as_f64().abs()).then(a.cmp(&b)));
    let mut out = alive.to_vec();
    for &k in &live[..count] {
        out[k] = false;
    }
    out
}

fn settle<T: Scalar>(value: T, alive: bool, survivors: Survivors) -> T {
    match (alive, survivors) {
        (false, _) => T::zero(),
        (true, Survivors::Rearm) => T::one(),
        (true, Survivors::Carry) => value,
    }
}

/// Prunes `p_g` of the live edges and `p_theta` of the live weights (one
/// global ranking across both layers) by mask magnitude.
pub fn threshold_masks<T: Scalar>(
    edge_mask: &EdgeMask<T>,
    weight_mask: &WeightMask<T>,
    p_g: f64,
    p_theta: f64,
    survivors: Survivors,
) -> Result<(EdgeMask<T>, WeightMask<T>)> {
    let edge_alive = prune_smallest(&edge_mask.values, &edge_mask.alive, p_g);
    let edges = EdgeMask {
        values: edge_mask
            .values
            .iter()
            .zip(&edge_alive)
            .map(|(&v, &a)| settle(v, a, survivors))
            .collect(),
        alive: edge_alive,
    };

    let flat_values: Vec<T> = weight_mask.values.iter().flat_map(|t| t.as_slice().iter().copied()).collect();
    let flat_alive: Vec<bool> = weight_mask.alive.iter().flatten().copied().collect();
    let new_alive = prune_smallest(&flat_values, &flat_alive, p_theta);
    let split = weight_mask.alive[0].len();
    let mut values = weight_mask.values.clone();
    for (k, (&v, &a)) in flat_values.iter().zip(&new_alive).enumerate() {
        let (layer, idx) = if k < split { (0, k) } else { (1, k - split) };
        values[layer].as_mut_slice()[idx] = settle(v, a, survivors);
    }
    let alive = [new_alive[..split].to_vec(), new_alive[split..].to_vec()];
    Ok((edges, WeightMask { values, alive }))
}

/// Dense GCN training on the full graph: no mask learning, all masks 1.
pub fn train_dense<T: Scalar>(
    inputs: &GraphInputs<T>,
    start: &Weights<T>,
    config: &UgsConfig,
    task: &Task,
) -> Result<RoundResult<T>> {
    let dims = start.dims();
    train_frozen(
        inputs,
        start,
        &EdgeMask::ones(inputs.adj.num_edges()),
        &WeightMask::ones(dims),
        config,
        task,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn f(values: &[f64]) -> EdgeMask<f64> {
        EdgeMask {
            values: values.to_vec(),
            alive: vec![true; values.len()],
        }
    }

    fn no_weights() -> WeightMask<f64> {
        WeightMask::ones(crate::model::GcnDims::new(1, 1, 1))
    }

    #[test]
    fn threshold_single_smallest() {
        let (e, _) = threshold_masks(&f(&[0.9, 0.1, 0.5, 0.3]), &no_weights(), 0.25, 0.2, Survivors::Rearm).unwrap();
        assert_eq!(e.alive, vec![true, false, true, true]);
        assert_eq!(e.values, vec![1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn threshold_uses_magnitude() {
        let (e, _) = threshold_masks(&f(&[-0.8, 0.1]), &no_weights(), 0.5, 0.2, Survivors::Rearm).unwrap();
        assert_eq!(e.alive, vec![true, false]);
        assert_eq!(e.values, vec![1.0, 0.0]);
    }

    #[test]
    fn threshold_ties_by_index() {
        let (e, _) = threshold_masks(&f(&[0.4; 4]), &no_weights(), 0.5, 0.2, Survivors::Rearm).unwrap();
        assert_eq!(e.alive, vec![false, false, true, true]);
    }

    #[test]
    fn carry_keeps_values_and_dead_stay_dead() {
        let m = EdgeMask {
            values: vec![0.0, 0.7, -0.2, 0.9, 0.3],
            alive: vec![false, true, true, true, true],
        };
        let (e, _) = threshold_masks(&m, &no_weights(), 0.25, 0.2, Survivors::Carry).unwrap();
        assert_eq!(e.alive, vec![false, true, false, true, true]);
        assert_eq!(e.values, vec![0.0, 0.7, 0.0, 0.9, 0.3]);
    }

    #[test]
    fn weight_threshold_is_global() {
        let dims = crate::model::GcnDims::new(2, 2, 1);
        let mut wm = WeightMask::<f64>::ones(dims);
        wm.values[0] = Tensor::from_vec(2, 2, vec![0.9, 0.8, 0.7, 0.6]).unwrap();
        wm.values[1] = Tensor::from_vec(2, 1, vec![0.1, 0.2]).unwrap();
        let (_, w) = threshold_masks(&f(&[1.0]), &wm, 0.5, 0.34, Survivors::Rearm).unwrap();
        // floor(0.34 * 6) = 2: both second-layer entries go
        assert_eq!(w.alive[0], vec![true; 4]);
        assert_eq!(w.alive[1], vec![false, false]);
        assert_eq!(w.values[1].as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn prune_counts() {
        assert_eq!(prune_count(0.05, 5278), 263);
        assert_eq!(prune_count(0.05, 10), 1);
        assert_eq!(prune_count(0.2, 1), 1);
        assert_eq!(prune_count(0.2, 0), 0);
        assert_eq!(prune_count(0.2, 5), 1);
    }

    #[test]
    fn config_validation() {
        assert!(UgsConfig::default().validate().is_ok());
        let zero = UgsConfig {
            iterations: 0,
            ..UgsConfig::default()
        };
        assert!(matches!(zero.validate(), Err(GltError::Config(_))));
        let p = UgsConfig {
            p_g: 1.0,
            ..UgsConfig::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn negatives_avoid_training_edges() {
        let task = LinkTask::new(
            4,
            vec![(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)],
            (vec![(1, 3)], vec![(0, 0)]),
            (vec![(1, 3)], vec![(0, 0)]),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (u, v) = task.sample_negative(&mut rng);
            assert_eq!((u.min(v), u.max(v)), (1, 3));
        }
    }
}
