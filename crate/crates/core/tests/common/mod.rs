//! Independent oracles shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use glt_core::autodiff::{Tape, Tensor};
use glt_core::dataset::{import_linqs, synth_sbm, Dataset, SbmParams};
use glt_core::graph::{EdgeMask, Graph};
use glt_core::model::{forward, GcnDims, GcnParams, GradFlags, GraphInputs, WeightMask, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cora")
}

/// Cora from the vendored LINQS files, features row-normalized.
pub fn cora() -> Dataset {
    let dir = data_dir();
    let mut ds = import_linqs("cora", &dir.join("cora.content.gz"), &dir.join("cora.cites")).expect("vendored Cora");
    ds.graph = ds.graph.row_normalized();
    ds
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, 1, 1, vec![0.0; n], edges, vec![None; n]).unwrap()
}

fn adjacency(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    let mut a = vec![vec![false; n]; n];
    for &(i, j) in g.edges() {
        a[i][j] = true;
        a[j][i] = true;
    }
    a
}

/// Triangle counting over all neighbor pairs.
pub fn brute_clustering(g: &Graph) -> f64 {
    let a = adjacency(g);
    let n = g.num_nodes();
    let mut total = 0.0;
    for v in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&u| a[v][u]).collect();
        let d = nb.len();
        if d < 2 {
            continue;
        }
        let mut t = 0;
        for x in 0..d {
            for y in x + 1..d {
                if a[nb[x]][nb[y]] {
                    t += 1;
                }
            }
        }
        total += t as f64 / (d * (d - 1) / 2) as f64;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn bfs(a: &[Vec<bool>], s: usize) -> Vec<usize> {
    let n = a.len();
    let mut d = vec![usize::MAX; n];
    d[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        for w in 0..n {
            if a[v][w] && d[w] == usize::MAX {
                d[w] = d[v] + 1;
                q.push_back(w);
            }
        }
    }
    d
}

/// Enumerates every shortest path explicitly for each unordered pair and
/// counts the fraction passing through each node and edge. Normalized by
/// `2/((n-1)(n-2))` and `2/(n(n-1))`.
pub fn brute_betweenness(g: &Graph) -> (Vec<f64>, Vec<f64>) {
    let a = adjacency(g);
    let n = g.num_nodes();
    let edge_id = |u: usize, v: usize| {
        let key = (u.min(v), u.max(v));
        g.edges().iter().position(|&e| e == key).unwrap()
    };
    let mut node = vec![0.0; n];
    let mut edge = vec![0.0; g.num_edges()];
    for s in 0..n {
        let dist = bfs(&a, s);
        for t in s + 1..n {
            if dist[t] == usize::MAX {
                continue;
            }
            let mut paths: Vec<Vec<usize>> = Vec::new();
            let mut stack = vec![vec![s]];
            while let Some(p) = stack.pop() {
                let last = *p.last().unwrap();
                if last == t {
                    paths.push(p);
                    continue;
                }
                for w in 0..n {
                    if a[last][w] && dist[w] == p.len() && dist[w] <= dist[t] {
                        let mut q = p.clone();
                        q.push(w);
                        stack.push(q);
                    }
                }
            }
            let share = 1.0 / paths.len() as f64;
            for p in &paths {
                for &v in &p[1..p.len() - 1] {
                    node[v] += share;
                }
                for w in p.windows(2) {
                    edge[edge_id(w[0], w[1])] += share;
                }
            }
        }
    }
    let ns = if n < 3 { 0.0 } else { 2.0 / ((n - 1) * (n - 2)) as f64 };
    let es = if n < 2 { 0.0 } else { 2.0 / (n * (n - 1)) as f64 };
    (node.iter().map(|x| x * ns).collect(), edge.iter().map(|x| x * es).collect())
}

/// Runs inference with explicit loops over the live structure, counting
/// every multiply-accumulate, and returns the count with the logits.
pub fn counted_inference(
    graph: &Graph,
    edge_alive: &[bool],
    weights: &Weights<f64>,
    weight_alive: &[Vec<bool>; 2],
) -> (u64, Vec<f64>) {
    let n = graph.num_nodes();
    let mut deg = vec![1.0f64; n];
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        if edge_alive[k] {
            deg[i] += 1.0;
            deg[j] += 1.0;
        }
    }
    let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|v| (v, v, 1.0 / deg[v])).collect();
    for (k, &(i, j)) in graph.edges().iter().enumerate() {
        if edge_alive[k] {
            let w = 1.0 / (deg[i] * deg[j]).sqrt();
            entries.push((i, j, w));
            entries.push((j, i, w));
        }
    }
    let mut macs = 0u64;
    let mut h: Vec<f64> = graph.features().iter().map(|&x| x as f64).collect();
    let mut width = graph.num_features();
    for l in 0..2 {
        let mut agg = vec![0.0; n * width];
        for &(r, c, w) in &entries {
            for f in 0..width {
                agg[r * width + f] += w * h[c * width + f];
                macs += 1;
            }
        }
        let theta = &weights.theta[l];
        let out = theta.cols();
        let mut next = vec![0.0; n * out];
        for v in 0..n {
            for i in 0..width {
                for o in 0..out {
                    if weight_alive[l][i * out + o] {
                        next[v * out + o] += agg[v * width + i] * theta.get(i, o);
                        macs += 1;
                    }
                }
            }
        }
        if let Some(b) = &weights.bias[l] {
            for v in 0..n {
                for o in 0..out {
                    next[v * out + o] += b.as_slice()[o];
                }
            }
        }
        if l == 0 {
            next.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        h = next;
        width = out;
    }
    (macs, h)
}

pub struct FdReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst: String,
}

pub fn sbm6(seed: u64) -> Dataset {
    let params = SbmParams {
        nodes: 6,
        classes: 2,
        p_in: 0.9,
        p_out: 0.3,
        feature_dim: 4,
        noise: 0.5,
    };
    synth_sbm(&params, seed).unwrap()
}

/// A graph with enough edges to survive twenty pruning rounds.
pub fn sbm_for_schedule() -> Dataset {
    synth_sbm(&SbmParams { nodes: 200, ..SbmParams::default() }, 1).unwrap()
}

#[derive(Clone)]
struct Point {
    weights: Weights<f64>,
    edge: EdgeMask<f64>,
    wmask: WeightMask<f64>,
}

/// Leaf `k` of the flattened parameter list, as a mutable reference.
fn entry(p: &mut Point, mut k: usize) -> (&'static str, &mut f64) {
    let [t0, t1] = &mut p.weights.theta;
    let [b0, b1] = &mut p.weights.bias;
    let [w0, w1] = &mut p.wmask.values;
    let mut blocks: Vec<(&'static str, &mut [f64])> = vec![("theta0", t0.as_mut_slice()), ("theta1", t1.as_mut_slice())];
    if let Some(b) = b0 {
        blocks.push(("bias0", b.as_mut_slice()));
    }
    if let Some(b) = b1 {
        blocks.push(("bias1", b.as_mut_slice()));
    }
    blocks.push(("edge_mask", &mut p.edge.values));
    blocks.push(("weight_mask0", w0.as_mut_slice()));
    blocks.push(("weight_mask1", w1.as_mut_slice()));
    for (name, block) in blocks {
        if k < block.len() {
            return (name, &mut block[k]);
        }
        k -= block.len();
    }
    panic!("leaf index out of range")
}

/// Full objective: cross-entropy over labeled nodes (or link BCE) plus
/// `g1 * |m_g|_1 + g2 * |m_theta|_1` over live entries. Returns the value
/// and, when asked, the gradient in the flattened leaf order.
fn objective(
    inputs: &GraphInputs<f64>,
    p: &Point,
    rows: &[usize],
    labels: &[usize],
    link: Option<(&[(usize, usize)], &[f64])>,
    gammas: (f64, f64),
    with_grad: bool,
) -> (f64, Vec<f64>) {
    let mut tape = Tape::new();
    let v = forward::<f64, ChaCha8Rng>(&mut tape, inputs, &p.edge, &p.weights, &p.wmask, GradFlags::ALL, None).unwrap();
    let task = match link {
        None => tape.softmax_cross_entropy(v.output, rows, labels).unwrap(),
        Some((pairs, targets)) => {
            let s = tape.pair_dot(v.output, pairs).unwrap();
            tape.sigmoid_bce(s, targets).unwrap()
        }
    };
    let pg = tape.l1_penalty(v.edge_mask, Some(&p.edge.alive)).unwrap();
    let pg = tape.scale(pg, gammas.0).unwrap();
    let p0 = tape.l1_penalty(v.weight_mask[0], Some(&p.wmask.alive[0])).unwrap();
    let p1 = tape.l1_penalty(v.weight_mask[1], Some(&p.wmask.alive[1])).unwrap();
    let pw = tape.add(p0, p1).unwrap();
    let pw = tape.scale(pw, gammas.1).unwrap();
    let l = tape.add(task, pg).unwrap();
    let l = tape.add(l, pw).unwrap();
    let value = tape.value(l).item();
    if !with_grad {
        return (value, Vec::new());
    }
    tape.backward(l).unwrap();
    let mut g = Vec::new();
    for t in v.theta {
        g.extend_from_slice(tape.grad_or_zeros(t).as_slice());
    }
    for b in v.bias.into_iter().flatten() {
        g.extend_from_slice(tape.grad_or_zeros(b).as_slice());
    }
    g.extend_from_slice(tape.grad_or_zeros(v.edge_mask).as_slice());
    for t in v.weight_mask {
        g.extend_from_slice(tape.grad_or_zeros(t).as_slice());
    }
    (value, g)
}

/// Compares every analytic leaf gradient of the masked GCN objective with a
/// five-point central difference. Masks are random in [0.5, 1.5] with one
/// dead edge and a few dead weights. Relative error uses a 1e-8 floor.
pub fn fd_suite(seed: u64, link: bool) -> FdReport {
    let ds = sbm6(seed);
    let g = &ds.graph;
    assert!(g.num_edges() >= 3, "fixture graph too sparse");
    let inputs = GraphInputs::<f64>::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfd);
    let out = if link { 3 } else { 2 };
    let dims = GcnDims::new(4, 5, out);
    let mut weights = GcnParams::<f64>::init(dims, true, seed).unwrap().live;
    for b in weights.bias.iter_mut().flatten() {
        b.as_mut_slice().iter_mut().for_each(|x| *x = rng.random_range(-0.3..0.3));
    }
    let mut edge = EdgeMask::ones(g.num_edges());
    edge.values.iter_mut().for_each(|x| *x = rng.random_range(0.5..1.5));
    edge.alive[0] = false;
    edge.values[0] = 0.0;
    let mut wmask = WeightMask::ones(dims);
    for l in 0..2 {
        for (k, x) in wmask.values[l].as_mut_slice().iter_mut().enumerate() {
            if k % 7 == 3 {
                *x = 0.0;
                wmask.alive[l][k] = false;
            } else {
                *x = rng.random_range(0.5..1.5);
            }
        }
    }
    let point = Point { weights, edge, wmask };
    let rows: Vec<usize> = (0..g.num_nodes()).collect();
    let labels: Vec<usize> = rows.iter().map(|&v| g.labels()[v].unwrap()).collect();
    let pairs = [(0, 1), (2, 5), (3, 4), (1, 4)];
    let targets = [1.0, 0.0, 1.0, 0.0];
    let link = link.then_some((&pairs[..], &targets[..]));
    let gammas = (0.37, 0.21);

    let (_, analytic) = objective(&inputs, &point, &rows, &labels, link, gammas, true);
    let h = 1e-3;
    let mut report = FdReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    for k in 0..analytic.len() {
        let at = |delta: f64| {
            let mut p = point.clone();
            *entry(&mut p, k).1 += delta;
            objective(&inputs, &p, &rows, &labels, link, gammas, false).0
        };
        let numeric = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
        let err = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
        report.checked += 1;
        if err > report.max_rel_err {
            let mut p = point.clone();
            let name = entry(&mut p, k).0;
            report.max_rel_err = err;
            report.worst = format!("{name} (leaf {k}): analytic {:.6e}, numeric {numeric:.6e}", analytic[k]);
        }
    }
    report
}

pub fn tensor_close(a: &Tensor<f64>, b: &[f64], tol: f64) -> bool {
    a.as_slice().iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}
