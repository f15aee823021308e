//! Minimal reverse-mode differentiable arrays.
//!
//! Everything learnable in the planners lives in a [`DiffArray`]. A forward
//! pass records operations on a [`Tape`]; [`Tape::backward`] replays the tape
//! in reverse and returns the gradient of a scalar loss with respect to every
//! recorded node. Arrays are dense and row-major, and there is no implicit
//! broadcasting except a per-channel bias inside [`Tape::conv2d`].
//!
//! The engine is generic over [`Scalar`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking.

mod gradcheck;
mod optim;
mod tape;

pub use gradcheck::{grad_check, GradCheck};
pub use optim::RmsProp;
pub use tape::{BinaryOp, Gradients, Tape, Var};

use num_traits::Float;
use std::fmt::Debug;
use thiserror::Error;

/// Floating point element type of a [`DiffArray`].
pub trait Scalar: Float + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("parameter {index} has no gradient")]
    MissingGrad { index: usize },
    #[error("backward() needs a single-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;

pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}

/// Dense array with an optional gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffArray<T = f32> {
    shape: Vec<usize>,
    values: Vec<T>,
    grad: Option<Vec<T>>,
    requires_grad: bool,
}

impl<T: Scalar> DiffArray<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(mismatch("DiffArray::new", format!("zero-sized dimension in {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(mismatch(
                "DiffArray::new",
                format!("shape {shape:?} holds {n} values, got {}", values.len()),
            ));
        }
        Ok(Self {
            shape,
            values,
            grad: None,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![T::zero(); n],
            grad: None,
            requires_grad: false,
        }
    }

    /// A trainable array: gradients are recorded for it.
    pub fn param(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        Ok(Self::new(shape, values)?.with_grad())
    }

    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn accumulate_grad(&mut self, g: &[T]) {
        debug_assert_eq!(g.len(), self.values.len());
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => self.grad = Some(g.to_vec()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> DiffArray<U> {
        DiffArray {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
            grad: self
                .grad
                .as_ref()
                .map(|g| g.iter().map(|v| U::of(v.as_f64())).collect()),
            requires_grad: self.requires_grad,
        }
    }
}

/// Geometry of a stride-1 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub padding: usize,
}

impl ConvSpec {
    /// 3x3 kernel with one cell of zero padding: spatial dims are preserved.
    pub fn same3x3(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: (3, 3),
            padding: 1,
        }
    }

    pub fn pointwise(in_channels: usize, out_channels: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel: (1, 1),
            padding: 0,
        }
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.kernel.0, self.kernel.1]
    }

    pub fn output_dims(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let oh = (h + 2 * self.padding).checked_sub(self.kernel.0)? + 1;
        let ow = (w + 2 * self.padding).checked_sub(self.kernel.1)? + 1;
        Some((oh, ow))
    }
}
