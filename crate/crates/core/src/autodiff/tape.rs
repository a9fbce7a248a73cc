use rand::Rng;

use super::{Scalar, Tensor};
use crate::error::{GltError, Result};
use crate::graph::NormAdjacency;
use crate::sparse::CsrMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Normalized adjacency whose stored entries are a tape value, so that the
/// loss can be differentiated with respect to the edge mask.
#[derive(Clone, Copy, Debug)]
pub struct MaskedAdjacency<'a, T> {
    adj: &'a NormAdjacency<T>,
    values: Var,
}

impl<'a, T: Scalar> MaskedAdjacency<'a, T> {
    pub fn adjacency(&self) -> &'a NormAdjacency<T> {
        self.adj
    }

    /// Tape value holding the `nnz x 1` entry vector.
    pub fn values(&self) -> Var {
        self.values
    }
}

enum Op<'a, T> {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul { lhs: &'a CsrMatrix<T>, rhs: Var },
    EdgeMask { adj: &'a NormAdjacency<T>, mask: Var },
    Spmm { adj: &'a NormAdjacency<T>, values: Var, rhs: Var },
    Mul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Dropout { input: Var, keep: Vec<T> },
    SoftmaxCrossEntropy { logits: Var, rows: Vec<usize>, labels: Vec<usize>, probs: Vec<f64> },
    SigmoidBce { scores: Var, targets: Vec<T> },
    L1 { input: Var, active: Option<Vec<bool>> },
    PairDot { emb: Var, pairs: Vec<(usize, usize)> },
    Sum(Var),
}

struct Node<'a, T> {
    value: Tensor<T>,
    grad: Option<Tensor<T>>,
    requires_grad: bool,
    op: Op<'a, T>,
}

/// Ordered record of executed operations.
///
/// Nodes are appended in execution order, so a reverse sweep over the node
/// list visits every consumer before its inputs.
pub struct Tape<'a, T> {
    nodes: Vec<Node<'a, T>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers an input. Gradients are only retained for leaves created
    /// with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient, or `None` if nothing flowed into `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Gradient of `v`, zeros when nothing flowed into it.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor<T> {
        let (r, c) = self.value(v).shape();
        self.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(r, c))
    }

    /// Zeroes all gradients so that [`Tape::backward`] may run again.
    pub fn reset_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.backward_done = false;
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, inputs: &[Var], op: Op<'a, T>) -> Result<Var> {
        if !value.all_finite() {
            return Err(GltError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Dense product `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = av.shape();
        let (k2, n) = bv.shape();
        if k != k2 {
            return Err(GltError::shape("matmul", format!("{m}x{k} · {k2}x{n}")));
        }
        let mut out = Vec::with_capacity(m * n);
        let mut acc = vec![0f64; n];
        for i in 0..m {
            acc.fill(0.0);
            for (p, &a_ip) in av.row(i).iter().enumerate() {
                if a_ip == T::zero() {
                    continue;
                }
                let a_ip = a_ip.as_f64();
                for (s, &b_pj) in acc.iter_mut().zip(bv.row(p)) {
                    *s += a_ip * b_pj.as_f64();
                }
            }
            out.extend(acc.iter().map(|&s| T::of(s)));
        }
        let value = Tensor::from_vec(m, n, out)?;
        self.push("matmul", value, &[a, b], Op::MatMul(a, b))
    }

    /// Product of a constant sparse matrix with a tape value.
    pub fn sparse_matmul(&mut self, lhs: &'a CsrMatrix<T>, rhs: Var) -> Result<Var> {
        let hv = self.value(rhs);
        if lhs.n_cols() != hv.rows() {
            return Err(GltError::shape(
                "sparse_matmul",
                format!("{}x{} · {}x{}", lhs.n_rows(), lhs.n_cols(), hv.rows(), hv.cols()),
            ));
        }
        let value = csr_times_dense(lhs, lhs.values(), hv);
        self.push("sparse_matmul", value, &[rhs], Op::SparseMatMul { lhs, rhs })
    }

    /// Scales every off-diagonal entry of `adj` by the mask value of its
    /// undirected edge. `mask` must be a `num_edges x 1` column.
    pub fn apply_edge_mask(&mut self, adj: &'a NormAdjacency<T>, mask: Var) -> Result<MaskedAdjacency<'a, T>> {
        let mv = self.value(mask);
        if mv.shape() != (adj.num_edges(), 1) {
            return Err(GltError::shape(
                "apply_edge_mask",
                format!("mask {:?} for {} edges", mv.shape(), adj.num_edges()),
            ));
        }
        let m = mv.as_slice();
        let vals: Vec<T> = adj
            .matrix()
            .values()
            .iter()
            .zip(adj.edge_slots())
            .map(|(&v, slot)| match slot {
                Some(e) => v * m[*e],
                None => v,
            })
            .collect();
        let nnz = vals.len();
        let value = Tensor::from_vec(nnz, 1, vals)?;
        let values = self.push("apply_edge_mask", value, &[mask], Op::EdgeMask { adj, mask })?;
        Ok(MaskedAdjacency { adj, values })
    }

    /// The adjacency with its stored entries as a constant.
    pub fn unmasked(&mut self, adj: &'a NormAdjacency<T>) -> MaskedAdjacency<'a, T> {
        let vals = adj.matrix().values().to_vec();
        let values = self.constant(Tensor::from_vec(vals.len(), 1, vals).expect("column shape"));
        MaskedAdjacency { adj, values }
    }

    /// `out[i] = Σ_j M[i,j] · h[j]` for the masked adjacency `M`.
    pub fn masked_spmm(&mut self, masked: &MaskedAdjacency<'a, T>, h: Var) -> Result<Var> {
        let adj = masked.adj;
        let hv = self.value(h);
        if adj.num_nodes() != hv.rows() {
            return Err(GltError::shape(
                "masked_spmm",
                format!("{n}x{n} · {}x{}", hv.rows(), hv.cols(), n = adj.num_nodes()),
            ));
        }
        let value = csr_times_dense(adj.matrix(), self.value(masked.values).as_slice(), hv);
        self.push(
            "masked_spmm",
            value,
            &[masked.values, h],
            Op::Spmm {
                adj,
                values: masked.values,
                rhs: h,
            },
        )
    }

    fn check_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(GltError::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("mul", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av.as_slice().iter().zip(bv.as_slice()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::from_vec(av.rows(), av.cols(), data)?;
        self.push("mul", value, &[a, b], Op::Mul(a, b))
    }

    /// Elementwise sum of equally shaped values (scalars included).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape("add", a, b)?;
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push("add", value, &[a, b], Op::Add(a, b))
    }

    /// Adds a `1 x cols` row vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.shape() != (1, xv.cols()) {
            return Err(GltError::shape("add_row", format!("{:?} + {:?}", xv.shape(), bv.shape())));
        }
        let cols = xv.cols();
        let data = xv
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| v + bv.as_slice()[k % cols])
            .collect();
        let value = Tensor::from_vec(xv.rows(), cols, data)?;
        self.push("add_row", value, &[x, bias], Op::AddRow(x, bias))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Result<Var> {
        let value = self.value(x).map(|v| v * c);
        self.push("scale", value, &[x], Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push("relu", value, &[x], Op::Relu(x))
    }

    /// Inverted dropout: zeroes entries with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if rate <= 0.0 {
            return Ok(x);
        }
        if rate >= 1.0 {
            return Err(GltError::Config(format!("dropout rate {rate} must be < 1")));
        }
        let scale = T::of(1.0 / (1.0 - rate));
        let xv = self.value(x);
        let keep: Vec<T> = (0..xv.len())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { scale })
            .collect();
        let data = xv.as_slice().iter().zip(&keep).map(|(&v, &k)| v * k).collect();
        let value = Tensor::from_vec(xv.rows(), xv.cols(), data)?;
        self.push("dropout", value, &[x], Op::Dropout { input: x, keep })
    }

    /// Mean negative log-likelihood of `labels[k]` at row `rows[k]` under a
    /// row-wise softmax of `logits`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, rows: &[usize], labels: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Err(GltError::EmptySet("softmax_cross_entropy"));
        }
        if rows.len() != labels.len() {
            return Err(GltError::shape(
                "softmax_cross_entropy",
                format!("{} rows, {} labels", rows.len(), labels.len()),
            ));
        }
        let lv = self.value(logits);
        let c = lv.cols();
        if let Some(&bad) = rows.iter().find(|&&r| r >= lv.rows()) {
            return Err(GltError::shape("softmax_cross_entropy", format!("row {bad} of {}", lv.rows())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(GltError::shape("softmax_cross_entropy", format!("label {bad} of {c} classes")));
        }
        let mut probs = Vec::with_capacity(rows.len() * c);
        let mut total = 0f64;
        for (&r, &y) in rows.iter().zip(labels) {
            // log-sum-exp form: ln(p_y) itself underflows for confident wrong rows
            total += log_sum_exp(lv.row(r)) - lv.row(r)[y].as_f64();
            probs.extend(softmax_row(lv.row(r)));
        }
        let loss = total / rows.len() as f64;
        let value = Tensor::scalar(T::of(loss));
        self.push(
            "softmax_cross_entropy",
            value,
            &[logits],
            Op::SoftmaxCrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    /// Mean binary cross-entropy of `sigmoid(scores)` against `targets`.
    pub fn sigmoid_bce(&mut self, scores: Var, targets: &[T]) -> Result<Var> {
        let sv = self.value(scores);
        if sv.len() != targets.len() {
            return Err(GltError::shape("sigmoid_bce", format!("{} scores, {} targets", sv.len(), targets.len())));
        }
        if targets.is_empty() {
            return Err(GltError::EmptySet("sigmoid_bce"));
        }
        let total: f64 = sv
            .as_slice()
            .iter()
            .zip(targets)
            .map(|(&s, &t)| {
                let (s, t) = (s.as_f64(), t.as_f64());
                s.max(0.0) - s * t + (-s.abs()).exp().ln_1p()
            })
            .sum();
        let value = Tensor::scalar(T::of(total / targets.len() as f64));
        self.push(
            "sigmoid_bce",
            value,
            &[scores],
            Op::SigmoidBce {
                scores,
                targets: targets.to_vec(),
            },
        )
    }

    /// `Σ |x|` over entries flagged in `active` (all entries when `None`).
    pub fn l1_penalty(&mut self, x: Var, active: Option<&[bool]>) -> Result<Var> {
        let xv = self.value(x);
        if let Some(a) = active {
            if a.len() != xv.len() {
                return Err(GltError::shape("l1_penalty", format!("{} flags for {} values", a.len(), xv.len())));
            }
        }
        let total: f64 = xv
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(k, _)| active.is_none_or(|a| a[*k]))
            .map(|(_, v)| v.as_f64().abs())
            .sum();
        let value = Tensor::scalar(T::of(total));
        self.push(
            "l1_penalty",
            value,
            &[x],
            Op::L1 {
                input: x,
                active: active.map(<[bool]>::to_vec),
            },
        )
    }

    /// Inner products `<z_u, z_v>` for each pair, as a `pairs x 1` column.
    pub fn pair_dot(&mut self, emb: Var, pairs: &[(usize, usize)]) -> Result<Var> {
        let zv = self.value(emb);
        if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u >= zv.rows() || v >= zv.rows()) {
            return Err(GltError::shape("pair_dot", format!("pair ({u}, {v}) with {} rows", zv.rows())));
        }
        let data = pairs
            .iter()
            .map(|&(u, v)| T::of(dot(zv.row(u), zv.row(v))))
            .collect();
        let value = Tensor::from_vec(pairs.len(), 1, data)?;
        self.push(
            "pair_dot",
            value,
            &[emb],
            Op::PairDot {
                emb,
                pairs: pairs.to_vec(),
            },
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: f64 = self.value(x).as_slice().iter().map(|v| v.as_f64()).sum();
        self.push("sum", Tensor::scalar(T::of(total)), &[x], Op::Sum(x))
    }

    /// Propagates d`loss` to every node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(GltError::Contract(
                "backward already ran on this tape; call reset_grads first".into(),
            ));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(GltError::shape("backward", format!("loss has shape {:?}", self.value(loss).shape())));
        }
        self.backward_done = true;
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &rest[0];
            let Some(g) = node.grad.as_ref() else { continue };
            if !node.requires_grad {
                continue;
            }
            backprop(before, node, g);
        }
        Ok(())
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.as_f64() * y.as_f64()).sum()
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> f64 {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v.as_f64() - max).exp()).sum::<f64>().ln()
}

fn softmax_row<T: Scalar>(row: &[T]) -> Vec<f64> {
    let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v.as_f64() - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Row-wise softmax, computed with max subtraction.
#[cfg(test)]
pub(crate) fn softmax<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let data = (0..t.rows()).flat_map(|r| softmax_row(t.row(r))).map(T::of).collect();
    Tensor::from_vec(t.rows(), t.cols(), data).expect("same shape")
}

fn csr_times_dense<T: Scalar>(m: &CsrMatrix<T>, values: &[T], h: &Tensor<T>) -> Tensor<T> {
    let f = h.cols();
    let mut out = Vec::with_capacity(m.n_rows() * f);
    let mut acc = vec![0f64; f];
    let indptr = m.indptr();
    for i in 0..m.n_rows() {
        acc.fill(0.0);
        for k in indptr[i]..indptr[i + 1] {
            let w = values[k].as_f64();
            for (s, &x) in acc.iter_mut().zip(h.row(m.indices()[k])) {
                *s += w * x.as_f64();
            }
        }
        out.extend(acc.iter().map(|&s| T::of(s)));
    }
    Tensor::from_vec(m.n_rows(), f, out).expect("rows x cols")
}

fn accumulate<T: Scalar>(nodes: &mut [Node<'_, T>], v: Var, delta: Tensor<T>) {
    let node = &mut nodes[v.0];
    if !node.requires_grad {
        return;
    }
    match node.grad.as_mut() {
        Some(g) => g.add_assign(&delta),
        None => node.grad = Some(delta),
    }
}

fn from_f64<T: Scalar>(rows: usize, cols: usize, data: Vec<f64>) -> Tensor<T> {
    Tensor::from_vec(rows, cols, data.into_iter().map(T::of).collect()).expect("gradient shape")
}

fn backprop<T: Scalar>(before: &mut [Node<'_, T>], node: &Node<'_, T>, g: &Tensor<T>) {
    let needs = |nodes: &[Node<'_, T>], v: Var| nodes[v.0].requires_grad;
    match &node.op {
        Op::Leaf => {}
        &Op::MatMul(a, b) => {
            let (m, k) = before[a.0].value.shape();
            let n = before[b.0].value.cols();
            if needs(before, a) {
                let bv = &before[b.0].value;
                let mut da = vec![0f64; m * k];
                for i in 0..m {
                    let gi = g.row(i);
                    for p in 0..k {
                        da[i * k + p] = dot(gi, bv.row(p));
                    }
                }
                accumulate(before, a, from_f64(m, k, da));
            }
            if needs(before, b) {
                let av = &before[a.0].value;
                let mut db = vec![0f64; k * n];
                for i in 0..m {
                    let gi = g.row(i);
                    for (p, &a_ip) in av.row(i).iter().enumerate() {
                        if a_ip == T::zero() {
                            continue;
                        }
                        let a_ip = a_ip.as_f64();
                        for (s, &gij) in db[p * n..(p + 1) * n].iter_mut().zip(gi) {
                            *s += a_ip * gij.as_f64();
                        }
                    }
                }
                accumulate(before, b, from_f64(k, n, db));
            }
        }
        &Op::SparseMatMul { lhs, rhs } => {
            let n = g.cols();
            let mut dw = vec![0f64; lhs.n_cols() * n];
            for i in 0..lhs.n_rows() {
                let gi = g.row(i);
                let (cols, vals) = lhs.row(i);
                for (&p, &x) in cols.iter().zip(vals) {
                    let x = x.as_f64();
                    for (s, &gij) in dw[p * n..(p + 1) * n].iter_mut().zip(gi) {
                        *s += x * gij.as_f64();
                    }
                }
            }
            accumulate(before, rhs, from_f64(lhs.n_cols(), n, dw));
        }
        &Op::EdgeMask { adj, mask } => {
            let mut dm = vec![0f64; adj.num_edges()];
            for ((&v, slot), &ge) in adj.matrix().values().iter().zip(adj.edge_slots()).zip(g.as_slice()) {
                if let Some(e) = slot {
                    dm[*e] += v.as_f64() * ge.as_f64();
                }
            }
            accumulate(before, mask, from_f64(adj.num_edges(), 1, dm));
        }
        &Op::Spmm { adj, values, rhs } => {
            let m = adj.matrix();
            let indptr = m.indptr();
            if needs(before, values) {
                let hv = &before[rhs.0].value;
                let mut dv = vec![0f64; m.nnz()];
                for i in 0..m.n_rows() {
                    for k in indptr[i]..indptr[i + 1] {
                        dv[k] = dot(g.row(i), hv.row(m.indices()[k]));
                    }
                }
                accumulate(before, values, from_f64(m.nnz(), 1, dv));
            }
            if needs(before, rhs) {
                let vals = before[values.0].value.as_slice();
                let f = g.cols();
                let mut dh = vec![0f64; m.n_cols() * f];
                for i in 0..m.n_rows() {
                    let gi = g.row(i);
                    for k in indptr[i]..indptr[i + 1] {
                        let j = m.indices()[k];
                        let w = vals[k].as_f64();
                        for (s, &gic) in dh[j * f..(j + 1) * f].iter_mut().zip(gi) {
                            *s += w * gic.as_f64();
                        }
                    }
                }
                accumulate(before, rhs, from_f64(m.n_cols(), f, dh));
            }
        }
        &Op::Mul(a, b) => {
            let (r, c) = g.shape();
            if needs(before, a) {
                let bv = before[b.0].value.as_slice();
                let d = g.as_slice().iter().zip(bv).map(|(&x, &y)| x * y).collect();
                accumulate(before, a, Tensor::from_vec(r, c, d).expect("shape"));
            }
            if needs(before, b) {
                let av = before[a.0].value.as_slice();
                let d = g.as_slice().iter().zip(av).map(|(&x, &y)| x * y).collect();
                accumulate(before, b, Tensor::from_vec(r, c, d).expect("shape"));
            }
        }
        &Op::Add(a, b) => {
            accumulate(before, a, g.clone());
            accumulate(before, b, g.clone());
        }
        &Op::AddRow(x, bias) => {
            accumulate(before, x, g.clone());
            let c = g.cols();
            let mut db = vec![0f64; c];
            for r in 0..g.rows() {
                for (s, &v) in db.iter_mut().zip(g.row(r)) {
                    *s += v.as_f64();
                }
            }
            accumulate(before, bias, from_f64(1, c, db));
        }
        &Op::Scale(x, c) => accumulate(before, x, g.map(|v| v * c)),
        &Op::Relu(x) => {
            let xv = &before[x.0].value;
            let d = g
                .as_slice()
                .iter()
                .zip(xv.as_slice())
                .map(|(&gv, &v)| if v > T::zero() { gv } else { T::zero() })
                .collect();
            accumulate(before, x, Tensor::from_vec(g.rows(), g.cols(), d).expect("shape"));
        }
        Op::Dropout { input, keep } => {
            let d = g.as_slice().iter().zip(keep).map(|(&gv, &k)| gv * k).collect();
            accumulate(before, *input, Tensor::from_vec(g.rows(), g.cols(), d).expect("shape"));
        }
        Op::SoftmaxCrossEntropy {
            logits,
            rows,
            labels,
            probs,
        } => {
            let (n, c) = before[logits.0].value.shape();
            let scale = g.item().as_f64() / rows.len() as f64;
            let mut d = vec![0f64; n * c];
            for (k, (&r, &y)) in rows.iter().zip(labels).enumerate() {
                for j in 0..c {
                    let target = if j == y { 1.0 } else { 0.0 };
                    d[r * c + j] += scale * (probs[k * c + j] - target);
                }
            }
            accumulate(before, *logits, from_f64(n, c, d));
        }
        Op::SigmoidBce { scores, targets } => {
            let sv = &before[scores.0].value;
            let scale = g.item().as_f64() / targets.len() as f64;
            let d = sv
                .as_slice()
                .iter()
                .zip(targets)
                .map(|(&s, &t)| {
                    let sig = 1.0 / (1.0 + (-s.as_f64()).exp());
                    scale * (sig - t.as_f64())
                })
                .collect();
            accumulate(before, *scores, from_f64(sv.rows(), sv.cols(), d));
        }
        Op::L1 { input, active } => {
            let xv = &before[input.0].value;
            let gs = g.item();
            let d = xv
                .as_slice()
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let on = active.as_ref().is_none_or(|a| a[k]);
                    if !on || v == T::zero() {
                        T::zero()
                    } else {
                        gs * v.signum()
                    }
                })
                .collect();
            accumulate(before, *input, Tensor::from_vec(xv.rows(), xv.cols(), d).expect("shape"));
        }
        Op::PairDot { emb, pairs } => {
            let zv = &before[emb.0].value;
            let c = zv.cols();
            let mut d = vec![0f64; zv.len()];
            for (&(u, v), &gp) in pairs.iter().zip(g.as_slice()) {
                let gp = gp.as_f64();
                for k in 0..c {
                    d[u * c + k] += gp * zv.get(v, k).as_f64();
                    d[v * c + k] += gp * zv.get(u, k).as_f64();
                }
            }
            accumulate(before, *emb, from_f64(zv.rows(), c, d));
        }
        &Op::Sum(x) => {
            let (r, c) = before[x.0].value.shape();
            accumulate(before, x, Tensor::filled(r, c, g.item()));
        }
    }
}
