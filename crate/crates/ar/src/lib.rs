//! Token-template serialization and a toy autoregressive transformer over
//! motion token grids, with grammar-constrained decoding.

pub mod generate;
pub mod model;
pub mod template;
pub mod train;
pub mod vocab;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ArError {
    #[error("malformed token stream at position {pos}: {what}")]
    Malformed { pos: usize, what: String },
    #[error("unknown word '{0}'")]
    UnknownWord(String),
    #[error("sample '{0}' exceeds the model context")]
    ContextOverflow(String),
    #[error("</mot> not emitted within the context window")]
    MaxLengthExceeded,
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Ad(#[from] motok_autodiff::AdError),
    #[error(transparent)]
    Prq(#[from] motok_prq::PrqError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub use generate::{generate, Sampling};
pub use model::{nll_loss, ArConfig, ArParams};
pub use template::{deserialize_tokens, serialize_tokens};
pub use train::{eval_pair, train_ar, TrainedAr};
pub use vocab::Vocab;
