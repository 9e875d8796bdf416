//! Tape-based reverse-mode differentiation and the adaptive-moment optimizer.

mod graph;
mod optim;
mod params;
mod real;
mod tensor;

use thiserror::Error;

pub use graph::{Gradients, Graph, Var};
pub use optim::{AdamConfig, LrSchedule, OptimizerState};
pub use params::{ParamId, ParamStore};
pub use real::Real;
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { len: usize, shape: Vec<usize> },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("backward needs a one-element loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),
}

#[cfg(test)]
mod tests;
