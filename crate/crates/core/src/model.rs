//! Two-layer GCN with elementwise weight masks.
//!
//! ```text
//! logits = M · relu(M · X · (m0 ⊙ Θ0) + b0) · (m1 ⊙ Θ1) + b1
//! ```
//!
//! where `M` is the normalized adjacency with the edge mask applied. Biases
//! are never masked and never counted towards weight sparsity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::autodiff::{Scalar, Tape, Tensor, Var};
use crate::error::{GltError, Result};
use crate::graph::{mean_abs_alive, normalize_adjacency, EdgeMask, Graph, NormAdjacency};
use crate::sparse::CsrMatrix;

/// Layer widths: input features, hidden units, output width (classes or
/// embedding dimension).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GcnDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl GcnDims {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        GcnDims { input, hidden, output }
    }

    /// `(fan_in, fan_out)` for both layers.
    pub fn layers(&self) -> [(usize, usize); 2] {
        [(self.input, self.hidden), (self.hidden, self.output)]
    }
}

/// One full set of weight values.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    pub theta: [Tensor<T>; 2],
    pub bias: [Option<Tensor<T>>; 2],
}

impl<T: Scalar> Weights<T> {
    pub fn dims(&self) -> GcnDims {
        GcnDims::new(self.theta[0].rows(), self.theta[0].cols(), self.theta[1].cols())
    }

    /// Number of maskable entries (biases excluded).
    pub fn maskable_len(&self) -> usize {
        self.theta[0].len() + self.theta[1].len()
    }

    /// SHA-256 over the exact bit patterns of all values.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for t in self.theta.iter().chain(self.bias.iter().flatten()) {
            hasher.update((t.rows() as u64).to_le_bytes());
            hasher.update((t.cols() as u64).to_le_bytes());
            for v in t.as_slice() {
                hasher.update(v.as_f64().to_bits().to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights {
            theta: [self.theta[0].cast(), self.theta[1].cast()],
            bias: [
                self.bias[0].as_ref().map(Tensor::cast),
                self.bias[1].as_ref().map(Tensor::cast),
            ],
        }
    }
}

/// Live weights plus the initialization snapshot they rewind to.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams<T> {
    pub live: Weights<T>,
    snapshot: Weights<T>,
}

impl<T: Scalar> GcnParams<T> {
    /// Glorot-uniform weights, zero biases; the snapshot is taken here.
    pub fn init(dims: GcnDims, with_bias: bool, seed: u64) -> Result<Self> {
        if dims.input == 0 || dims.hidden == 0 || dims.output == 0 {
            return Err(GltError::Config(format!("layer widths must be positive: {dims:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = dims.layers().map(|(fan_in, fan_out)| glorot(fan_in, fan_out, &mut rng));
        let bias = dims
            .layers()
            .map(|(_, fan_out)| with_bias.then(|| Tensor::zeros(1, fan_out)));
        let live = Weights { theta, bias };
        Ok(GcnParams {
            snapshot: live.clone(),
            live,
        })
    }

    pub fn from_weights(weights: Weights<T>) -> Self {
        GcnParams {
            snapshot: weights.clone(),
            live: weights,
        }
    }

    /// Rebuilds params whose live values differ from the snapshot, e.g. when
    /// loading a checkpoint.
    pub fn from_parts(live: Weights<T>, snapshot: Weights<T>) -> Result<Self> {
        let shapes = |w: &Weights<T>| {
            (
                w.theta.each_ref().map(Tensor::shape),
                w.bias.each_ref().map(|b| b.as_ref().map(Tensor::shape)),
            )
        };
        if shapes(&live) != shapes(&snapshot) {
            return Err(GltError::shape("gcn_params", "snapshot shapes differ from live weights"));
        }
        Ok(GcnParams { live, snapshot })
    }

    pub fn snapshot(&self) -> &Weights<T> {
        &self.snapshot
    }

    pub fn dims(&self) -> GcnDims {
        self.live.dims()
    }

    /// Restores the live weights to the snapshot, bit for bit.
    pub fn rewind(&mut self) {
        self.live = self.snapshot.clone();
    }
}

fn glorot<T: Scalar>(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| T::of(rng.random_range(-bound..bound)))
        .collect();
    Tensor::from_vec(fan_in, fan_out, data).expect("fan_in x fan_out")
}

/// Mask over the two weight matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMask<T> {
    pub values: [Tensor<T>; 2],
    pub alive: [Vec<bool>; 2],
}

impl<T: Scalar> WeightMask<T> {
    pub fn ones(dims: GcnDims) -> Self {
        let values = dims.layers().map(|(r, c)| Tensor::filled(r, c, T::one()));
        let alive = dims.layers().map(|(r, c)| vec![true; r * c]);
        WeightMask { values, alive }
    }

    /// Binary mask from liveness flags.
    pub fn from_alive(dims: GcnDims, alive: [Vec<bool>; 2]) -> Result<Self> {
        let mut values = Vec::with_capacity(2);
        for ((r, c), a) in dims.layers().into_iter().zip(&alive) {
            if a.len() != r * c {
                return Err(GltError::shape("weight_mask", format!("{} flags for {r}x{c}", a.len())));
            }
            let data = a.iter().map(|&on| if on { T::one() } else { T::zero() }).collect();
            values.push(Tensor::from_vec(r, c, data)?);
        }
        let [v0, v1]: [Tensor<T>; 2] = values.try_into().expect("two layers");
        Ok(WeightMask { values: [v0, v1], alive })
    }

    pub fn dims(&self) -> GcnDims {
        GcnDims::new(self.values[0].rows(), self.values[0].cols(), self.values[1].cols())
    }

    pub fn total(&self) -> usize {
        self.alive[0].len() + self.alive[1].len()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().flatten().filter(|&&a| a).count()
    }

    pub fn layer_alive_count(&self, layer: usize) -> usize {
        self.alive[layer].iter().filter(|&&a| a).count()
    }

    pub fn sparsity(&self) -> f64 {
        1.0 - self.alive_count() as f64 / self.total() as f64
    }

    pub fn mean_abs(&self) -> f64 {
        let values: Vec<T> = self.values.iter().flat_map(|t| t.as_slice().iter().copied()).collect();
        let alive: Vec<bool> = self.alive.iter().flatten().copied().collect();
        mean_abs_alive(&values, &alive)
    }

    pub fn cast<U: Scalar>(&self) -> WeightMask<U> {
        WeightMask {
            values: [self.values[0].cast(), self.values[1].cast()],
            alive: self.alive.clone(),
        }
    }
}

/// Per-graph constants of the forward pass.
pub struct GraphInputs<T> {
    pub features: CsrMatrix<T>,
    pub adj: NormAdjacency<T>,
}

impl<T: Scalar> GraphInputs<T> {
    pub fn new(graph: &Graph) -> Self {
        GraphInputs {
            features: graph.feature_matrix(),
            adj: normalize_adjacency(graph),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.num_nodes()
    }
}

/// Which leaves of a forward pass carry gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradFlags {
    pub weights: bool,
    pub edge_mask: bool,
    pub weight_mask: bool,
}

impl GradFlags {
    pub const ALL: GradFlags = GradFlags {
        weights: true,
        edge_mask: true,
        weight_mask: true,
    };
    pub const WEIGHTS: GradFlags = GradFlags {
        weights: true,
        edge_mask: false,
        weight_mask: false,
    };
    pub const NONE: GradFlags = GradFlags {
        weights: false,
        edge_mask: false,
        weight_mask: false,
    };
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    pub output: Var,
    pub theta: [Var; 2],
    pub bias: [Option<Var>; 2],
    pub edge_mask: Var,
    pub weight_mask: [Var; 2],
}

/// Dropout on the hidden activations during training.
pub struct Dropout<'r, R: Rng> {
    pub rate: f64,
    pub rng: &'r mut R,
}

fn check_shapes<T: Scalar>(
    features: &CsrMatrix<T>,
    adj: &NormAdjacency<T>,
    edge_mask: &EdgeMask<T>,
    weights: &Weights<T>,
    weight_mask: &WeightMask<T>,
) -> Result<()> {
    let dims = weights.dims();
    if features.n_cols() != dims.input {
        return Err(GltError::shape(
            "gcn_forward",
            format!("{} features, model expects {}", features.n_cols(), dims.input),
        ));
    }
    if weights.theta[1].rows() != dims.hidden {
        return Err(GltError::shape("gcn_forward", "layer widths do not chain"));
    }
    if weight_mask.dims() != dims {
        return Err(GltError::shape(
            "gcn_forward",
            format!("weight mask {:?} for weights {dims:?}", weight_mask.dims()),
        ));
    }
    if edge_mask.len() != adj.num_edges() {
        return Err(GltError::shape(
            "gcn_forward",
            format!("edge mask has {} slots for {} edges", edge_mask.len(), adj.num_edges()),
        ));
    }
    Ok(())
}

/// Records the masked two-layer GCN on `tape` and returns the raw output
/// (pre-softmax logits for classification, embeddings for link tasks).
pub fn forward<'a, T: Scalar, R: Rng>(
    tape: &mut Tape<'a, T>,
    inputs: &'a GraphInputs<T>,
    edge_mask: &EdgeMask<T>,
    weights: &Weights<T>,
    weight_mask: &WeightMask<T>,
    grads: GradFlags,
    dropout: Option<Dropout<'_, R>>,
) -> Result<ForwardVars> {
    forward_with_features(tape, &inputs.features, &inputs.adj, edge_mask, weights, weight_mask, grads, dropout)
}

/// [`forward`] with the feature matrix supplied separately, e.g. a copy with
/// dropout applied.
#[allow(clippy::too_many_arguments)]
pub fn forward_with_features<'a, T: Scalar, R: Rng>(
    tape: &mut Tape<'a, T>,
    features: &'a CsrMatrix<T>,
    adj: &'a NormAdjacency<T>,
    edge_mask: &EdgeMask<T>,
    weights: &Weights<T>,
    weight_mask: &WeightMask<T>,
    grads: GradFlags,
    dropout: Option<Dropout<'_, R>>,
) -> Result<ForwardVars> {
    check_shapes(features, adj, edge_mask, weights, weight_mask)?;
    let theta = [
        tape.leaf(weights.theta[0].clone(), grads.weights),
        tape.leaf(weights.theta[1].clone(), grads.weights),
    ];
    let bias = [
        weights.bias[0].clone().map(|b| tape.leaf(b, grads.weights)),
        weights.bias[1].clone().map(|b| tape.leaf(b, grads.weights)),
    ];
    let mg = Tensor::from_vec(edge_mask.len(), 1, edge_mask.values.clone())?;
    let edge_var = tape.leaf(mg, grads.edge_mask);
    let weight_vars = [
        tape.leaf(weight_mask.values[0].clone(), grads.weight_mask),
        tape.leaf(weight_mask.values[1].clone(), grads.weight_mask),
    ];

    let adj = tape.apply_edge_mask(adj, edge_var)?;
    let w0 = tape.mul(theta[0], weight_vars[0])?;
    let xw = tape.sparse_matmul(features, w0)?;
    let mut h = tape.masked_spmm(&adj, xw)?;
    if let Some(b) = bias[0] {
        h = tape.add_row(h, b)?;
    }
    h = tape.relu(h)?;
    if let Some(d) = dropout {
        h = tape.dropout(h, d.rate, d.rng)?;
    }
    let w1 = tape.mul(theta[1], weight_vars[1])?;
    let hw = tape.matmul(h, w1)?;
    let mut out = tape.masked_spmm(&adj, hw)?;
    if let Some(b) = bias[1] {
        out = tape.add_row(out, b)?;
    }
    Ok(ForwardVars {
        output: out,
        theta,
        bias,
        edge_mask: edge_var,
        weight_mask: weight_vars,
    })
}

/// Same pipeline as [`forward`]; the output width is an embedding dimension.
pub fn embed<'a, T: Scalar, R: Rng>(
    tape: &mut Tape<'a, T>,
    inputs: &'a GraphInputs<T>,
    edge_mask: &EdgeMask<T>,
    weights: &Weights<T>,
    weight_mask: &WeightMask<T>,
    grads: GradFlags,
    dropout: Option<Dropout<'_, R>>,
) -> Result<ForwardVars> {
    forward(tape, inputs, edge_mask, weights, weight_mask, grads, dropout)
}

/// Gradient-free evaluation of the network output.
pub fn predict<T: Scalar>(
    inputs: &GraphInputs<T>,
    edge_mask: &EdgeMask<T>,
    weights: &Weights<T>,
    weight_mask: &WeightMask<T>,
) -> Result<Tensor<T>> {
    let mut tape = Tape::new();
    let vars = forward::<T, ChaCha8Rng>(
        &mut tape,
        inputs,
        edge_mask,
        weights,
        weight_mask,
        GradFlags::NONE,
        None,
    )?;
    Ok(tape.value(vars.output).clone())
}

/// Raw inner-product scores `<z_u, z_v>`.
pub fn link_score<T: Scalar>(embeddings: &Tensor<T>, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let n = embeddings.rows();
    pairs
        .iter()
        .map(|&(u, v)| {
            if u >= n || v >= n {
                return Err(GltError::shape("link_score", format!("pair ({u}, {v}) with {n} nodes")));
            }
            Ok(embeddings
                .row(u)
                .iter()
                .zip(embeddings.row(v))
                .map(|(&a, &b)| a.as_f64() * b.as_f64())
                .sum())
        })
        .collect()
}
