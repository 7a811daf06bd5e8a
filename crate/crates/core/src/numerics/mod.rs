//! Dense tensors, reverse-mode gradients, Adam and checkpoints.

mod checkpoint;
pub mod gradcheck;
pub mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{load_tensors, read_tensors, save_tensors, write_tensors, CheckpointError};
pub use optim::{Adam, AdamConfig};
pub use params::{glorot, zeros_bias, BoundParams, ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value produced by {0}")]
    NonFiniteValue(&'static str),
    #[error("non-finite gradient at {0}")]
    NonFiniteGradient(String),
    #[error("row index {index} out of range ({len} rows)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid tensor: {0}")]
    Invalid(String),
}
