//! Minimal reverse-mode automatic differentiation over dense f64 tensors,
//! with exactly the operator set the tokenizer and the toy autoregressive
//! model need, plus first-class gradient checking.

pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod tape;
pub mod tensor;
pub mod verify;

pub use gradcheck::grad_check;
pub use optim::{Adam, AdamConfig, Sgd};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch: {lhs:?} vs {rhs:?} in {op}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("bad argument: {0}")]
    BadArg(String),
    #[error("checkpoint: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
