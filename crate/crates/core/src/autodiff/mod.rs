//! Minimal reverse-mode differentiation over dense matrices and the
//! edge-masked sparse-dense product.
//!
//! Values live on a [`Tape`] as nodes addressed by [`Var`] handles. Every
//! operation appends a node and records enough of its inputs to replay the
//! chain rule in reverse. Storage is generic over [`Scalar`] so the same code
//! trains in `f32` and is checked against finite differences in `f64`.
//! All reductions accumulate in `f64` and run sequentially, so identical
//! inputs give bit-identical values and gradients.

mod tape;
mod tensor;

pub use tape::{MaskedAdjacency, Tape, Var};
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point element type usable for tensors.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + Default + Debug + Display + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
