//! Iterative UGS with weight rewinding, plus the random baselines it is
//! compared against.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{macs_for_counts, MacsReport};
use crate::autodiff::Scalar;
use crate::error::{GltError, Result};
use crate::graph::{remove_pruned_edges, EdgeMask, Graph};
use crate::model::{GcnDims, GcnParams, GraphInputs, WeightMask, Weights};
use crate::ugs::{prune_count, threshold_masks, train_frozen, ugs_round, RoundResult, Survivors, Task, UgsConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GltConfig {
    pub target_graph_sparsity: f64,
    pub target_weight_sparsity: f64,
    pub max_rounds: usize,
    pub ugs: UgsConfig,
}

impl Default for GltConfig {
    fn default() -> Self {
        GltConfig {
            target_graph_sparsity: 0.99,
            target_weight_sparsity: 0.99,
            max_rounds: 20,
            ugs: UgsConfig::default(),
        }
    }
}

impl GltConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("target_graph_sparsity", self.target_graph_sparsity),
            ("target_weight_sparsity", self.target_weight_sparsity),
        ] {
            if !(0.0..1.0).contains(&s) {
                return Err(GltError::Config(format!("{name} = {s} must lie in [0, 1)")));
            }
        }
        self.ugs.validate()
    }
}

/// Liveness of every original edge and weight after some round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TicketMasks {
    pub edge_alive: Vec<bool>,
    pub weight_alive: [Vec<bool>; 2],
}

impl TicketMasks {
    pub fn dense(num_edges: usize, dims: GcnDims) -> Self {
        TicketMasks {
            edge_alive: vec![true; num_edges],
            weight_alive: dims.layers().map(|(r, c)| vec![true; r * c]),
        }
    }

    pub fn alive_edges(&self) -> usize {
        self.edge_alive.iter().filter(|&&a| a).count()
    }

    pub fn alive_weights(&self) -> [usize; 2] {
        self.weight_alive.each_ref().map(|a| a.iter().filter(|&&x| x).count())
    }

    pub fn graph_sparsity(&self) -> f64 {
        if self.edge_alive.is_empty() {
            return 0.0;
        }
        1.0 - self.alive_edges() as f64 / self.edge_alive.len() as f64
    }

    pub fn weight_sparsity(&self) -> f64 {
        let total = self.weight_alive[0].len() + self.weight_alive[1].len();
        1.0 - self.alive_weights().iter().sum::<usize>() as f64 / total as f64
    }

    pub fn weight_mask<T: Scalar>(&self, dims: GcnDims) -> Result<WeightMask<T>> {
        WeightMask::from_alive(dims, self.weight_alive.clone())
    }

    /// The graph restricted to the live edges.
    pub fn subgraph(&self, graph: &Graph) -> Result<Graph> {
        remove_pruned_edges(graph, &EdgeMask::<f32>::from_alive(self.edge_alive.clone()))
    }

    pub fn macs(&self, num_nodes: usize, dims: GcnDims) -> MacsReport {
        macs_for_counts(num_nodes, self.alive_edges(), self.alive_weights(), dims)
    }
}

/// One row of a ticket search. Round 0 is the dense model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub graph_sparsity: f64,
    pub weight_sparsity: f64,
    pub alive_edges: usize,
    pub alive_weights: usize,
    pub macs: u64,
    /// Metrics of the frozen-mask retrain from the initial weights.
    pub val_metric: f64,
    pub test_metric: f64,
    /// Metrics of the mask-learning run that produced this round's masks.
    pub ugs_val_metric: Option<f64>,
    pub ugs_test_metric: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TicketReport {
    pub dims: GcnDims,
    pub records: Vec<RoundRecord>,
    /// Masks after each round, index-aligned with `records`.
    pub tickets: Vec<TicketMasks>,
    /// Fingerprint of the weights every retrain started from.
    pub init_fingerprint: String,
}

impl TicketReport {
    pub fn final_ticket(&self) -> &TicketMasks {
        self.tickets.last().expect("report holds the dense round")
    }
}

/// Restores the live weights to their initialization snapshot.
pub fn rewind<T: Scalar>(params: &mut GcnParams<T>) {
    params.rewind();
}

fn round_seed(base: u64, round: usize) -> u64 {
    base.wrapping_add((round as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Retrains `init` on `graph` restricted to `ticket`, masks frozen.
pub fn evaluate_ticket<T: Scalar>(
    graph: &Graph,
    ticket: &TicketMasks,
    init: &Weights<T>,
    config: &UgsConfig,
    task: &Task,
) -> Result<RoundResult<T>> {
    let sub = ticket.subgraph(graph)?;
    let inputs = GraphInputs::<T>::new(&sub);
    let wm = ticket.weight_mask(init.dims())?;
    train_frozen(&inputs, init, &EdgeMask::ones(sub.num_edges()), &wm, config, task)
}

fn record(
    round: usize,
    ticket: &TicketMasks,
    num_nodes: usize,
    dims: GcnDims,
    retrain: (f64, f64),
    ugs: Option<(f64, f64)>,
    started: Instant,
) -> RoundRecord {
    RoundRecord {
        round,
        graph_sparsity: ticket.graph_sparsity(),
        weight_sparsity: ticket.weight_sparsity(),
        alive_edges: ticket.alive_edges(),
        alive_weights: ticket.alive_weights().iter().sum(),
        macs: ticket.macs(num_nodes, dims).total,
        val_metric: retrain.0,
        test_metric: retrain.1,
        ugs_val_metric: ugs.map(|u| u.0),
        ugs_test_metric: ugs.map(|u| u.1),
        wall_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Repeats mask learning, thresholding, rewinding and edge removal until a
/// sparsity target is reached or `max_rounds` rounds have run. Every round's
/// ticket is retrained in isolation from the snapshot weights of `params`.
pub fn find_glt<T: Scalar>(graph: &Graph, params: &GcnParams<T>, config: &GltConfig, task: &Task) -> Result<TicketReport> {
    config.validate()?;
    let init = params.snapshot();
    let dims = init.dims();
    let n = graph.num_nodes();
    let init_fingerprint = init.fingerprint();

    let started = Instant::now();
    let mut ticket = TicketMasks::dense(graph.num_edges(), dims);
    let dense = evaluate_ticket(graph, &ticket, init, &config.ugs, task)?;
    let mut records = vec![record(0, &ticket, n, dims, (dense.best_val, dense.test_at_best), None, started)];
    let mut tickets = vec![ticket.clone()];
    log::info!("round 0 (dense): val {:.4} test {:.4}", dense.best_val, dense.test_at_best);

    let mut current = graph.clone();
    // continuous mask values carried between rounds, aligned with `current`
    let mut edge_mask = EdgeMask::<T>::ones(graph.num_edges());
    let mut weight_mask = WeightMask::<T>::ones(dims);
    let mut round = 0;
    while round < config.max_rounds
        && ticket.graph_sparsity() < config.target_graph_sparsity
        && ticket.weight_sparsity() < config.target_weight_sparsity
    {
        if current.num_edges() == 0 {
            log::warn!("no edges left after round {round}; stopping");
            break;
        }
        round += 1;
        let started = Instant::now();
        let cfg = UgsConfig {
            seed: round_seed(config.ugs.seed, round),
            ..config.ugs.clone()
        };
        let inputs = GraphInputs::<T>::new(&current);
        let trained = ugs_round(&inputs, init, &edge_mask, &weight_mask, &cfg, task)?;
        let (em, wm) = threshold_masks(&trained.edge_mask, &trained.weight_mask, cfg.p_g, cfg.p_theta, cfg.survivors)?;

        let mut live = ticket.edge_alive.iter().enumerate().filter(|(_, &a)| a).map(|(k, _)| k);
        let mut edge_alive = ticket.edge_alive.clone();
        for &a in &em.alive {
            let k = live.next().expect("mask aligned with live edges");
            edge_alive[k] = a;
        }
        ticket = TicketMasks {
            edge_alive,
            weight_alive: wm.alive.clone(),
        };
        current = remove_pruned_edges(&current, &em)?;
        edge_mask = match cfg.survivors {
            Survivors::Rearm => EdgeMask::ones(current.num_edges()),
            Survivors::Carry => em.compacted(),
        };
        weight_mask = wm;

        // the retrain below starts from the same snapshot the round began at
        debug_assert_eq!(init.fingerprint(), init_fingerprint);
        let retrain = evaluate_ticket(graph, &ticket, init, &cfg, task)?;
        let rec = record(
            round,
            &ticket,
            n,
            dims,
            (retrain.best_val, retrain.test_at_best),
            Some((trained.best_val, trained.test_at_best)),
            started,
        );
        log::info!(
            "round {round}: graph sparsity {:.4} weight sparsity {:.4} ticket val {:.4} test {:.4}",
            rec.graph_sparsity,
            rec.weight_sparsity,
            rec.val_metric,
            rec.test_metric
        );
        records.push(rec);
        tickets.push(ticket.clone());
    }
    Ok(TicketReport {
        dims,
        records,
        tickets,
        init_fingerprint,
    })
}

fn kill_random(alive: &mut [bool], keep: usize, rng: &mut ChaCha8Rng) {
    let mut live: Vec<usize> = (0..alive.len()).filter(|&k| alive[k]).collect();
    if live.len() <= keep {
        return;
    }
    live.shuffle(rng);
    for &k in &live[..live.len() - keep] {
        alive[k] = false;
    }
}

/// Number of entries left alive at sparsity `s`: `total - floor(s * total)`.
pub fn alive_at_sparsity(total: usize, s: f64) -> usize {
    total - ((s * total as f64 + 1e-9).floor() as usize).min(total)
}

/// Uniformly random pruning of the live entries down to sparsities `s_g`
/// (edges) and `s_theta` (weights, both layers pooled). Entries already
/// dead stay dead, so repeated calls yield nested masks.
pub fn random_prune(ticket: &TicketMasks, s_g: f64, s_theta: f64, seed: u64) -> Result<TicketMasks> {
    for s in [s_g, s_theta] {
        if !(0.0..1.0).contains(&s) {
            return Err(GltError::Config(format!("sparsity {s} must lie in [0, 1)")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ticket.clone();
    let keep = alive_at_sparsity(out.edge_alive.len(), s_g);
    kill_random(&mut out.edge_alive, keep, &mut rng);
    let split = out.weight_alive[0].len();
    let mut flat: Vec<bool> = out.weight_alive.iter().flatten().copied().collect();
    let total = flat.len();
    kill_random(&mut flat, alive_at_sparsity(total, s_theta), &mut rng);
    out.weight_alive = [flat[..split].to_vec(), flat[split..].to_vec()];
    Ok(out)
}

impl TicketReport {
    /// `(alive edges, alive weights)` per round.
    pub fn alive_counts(&self) -> Vec<(usize, usize)> {
        self.tickets
            .iter()
            .map(|t| (t.alive_edges(), t.alive_weights().iter().sum()))
            .collect()
    }
}

/// Alive counts the pruning schedule produces, round 0 included, under the
/// same stopping rule as [`find_glt`] (assuming no early stop).
pub fn schedule_alive_counts(num_edges: usize, num_weights: usize, config: &GltConfig) -> Vec<(usize, usize)> {
    let (mut e, mut w) = (num_edges, num_weights);
    let sparsity = |alive: usize, total: usize| if total == 0 { 0.0 } else { 1.0 - alive as f64 / total as f64 };
    let mut out = vec![(e, w)];
    while out.len() <= config.max_rounds
        && sparsity(e, num_edges) < config.target_graph_sparsity
        && sparsity(w, num_weights) < config.target_weight_sparsity
        && e > 0
    {
        e -= prune_count(config.ugs.p_g, e);
        w -= prune_count(config.ugs.p_theta, w);
        out.push((e, w));
    }
    out
}

/// Random-pruning baseline: nested uniformly random masks with the given
/// `(alive edges, alive weights)` per round, each retrained from the
/// snapshot weights of `params`.
pub fn random_prune_series<T: Scalar>(
    graph: &Graph,
    params: &GcnParams<T>,
    targets: &[(usize, usize)],
    config: &UgsConfig,
    task: &Task,
    seed: u64,
) -> Result<TicketReport> {
    let init = params.snapshot();
    let dims = init.dims();
    let n = graph.num_nodes();
    let mut ticket = TicketMasks::dense(graph.num_edges(), dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut tickets = Vec::new();
    for &(edges, weights) in targets {
        let started = Instant::now();
        kill_random(&mut ticket.edge_alive, edges, &mut rng);
        let split = ticket.weight_alive[0].len();
        let mut flat: Vec<bool> = ticket.weight_alive.iter().flatten().copied().collect();
        kill_random(&mut flat, weights, &mut rng);
        ticket.weight_alive = [flat[..split].to_vec(), flat[split..].to_vec()];

        let round = records.len();
        let cfg = UgsConfig {
            seed: round_seed(config.seed, round),
            ..config.clone()
        };
        let r = evaluate_ticket(graph, &ticket, init, &cfg, task)?;
        records.push(record(round, &ticket, n, dims, (r.best_val, r.test_at_best), None, started));
        tickets.push(ticket.clone());
    }
    Ok(TicketReport {
        dims,
        records,
        tickets,
        init_fingerprint: init.fingerprint(),
    })
}

/// Keeps the ticket's masks but retrains them from a fresh random
/// initialization drawn with `seed`.
pub fn random_reinit_ticket<T: Scalar>(
    graph: &Graph,
    ticket: &TicketMasks,
    dims: GcnDims,
    with_bias: bool,
    config: &UgsConfig,
    task: &Task,
    seed: u64,
) -> Result<RoundResult<T>> {
    let fresh = GcnParams::<T>::init(dims, with_bias, seed)?;
    evaluate_ticket(graph, ticket, fresh.snapshot(), config, task)
}
