//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records operations as they run (define-by-run). Leaves are
//! either constants or parameters; parameters may be borrowed from the model
//! so building a graph does not copy weights. [`Graph::backward`] walks the
//! nodes in reverse creation order, which is a valid topological order, and
//! returns the gradient of every node that depends on a parameter.

mod adam;
pub mod gradcheck;
mod graph;
mod kernels;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, Var};
pub use kernels::{gelu, gelu_derivative, normal_cdf, Padding};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("conv2d: kernel {kernel:?} larger than input {input:?}")]
    KernelTooLarge { kernel: Vec<usize>, input: Vec<usize> },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("tensor data length {len} does not match shape {shape:?}")]
    BadShape { len: usize, shape: Vec<usize> },
    #[error("{0}")]
    Invalid(&'static str),
}

#[cfg(test)]
mod tests;
