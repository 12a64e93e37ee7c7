//! Part-residual motion tokenizer: a 2D convolutional encoder over the
//! part-time plane, a shared-codebook residual quantizer, and a symmetric
//! decoder, trained with straight-through gradients and EMA codebook updates.

pub mod codebook;
pub mod model;
pub mod quantize;
pub mod recon;
pub mod tokenfile;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PrqError {
    #[error("motion too short: {got} frames, need at least {need}")]
    TooShort { got: usize, need: usize },
    #[error("codebook is empty")]
    EmptyCodebook,
    #[error("token index {index} out of range for codebook of {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("non-finite loss in term '{0}'")]
    NonFiniteLoss(&'static str),
    #[error("bad token file: {0}")]
    BadFile(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Ad(#[from] motok_autodiff::AdError),
    #[error(transparent)]
    Core(#[from] motok_core::CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub use codebook::Codebook;
pub use quantize::{rq_quantize, LatentGrid, TokenGrid};
pub use recon::{decode_motion, encode, reconstruct};
pub use tokenfile::{load_tokens, save_tokens};
pub use train::{LossBreakdown, TokenizerConfig, Trainer};
