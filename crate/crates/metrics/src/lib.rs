//! Evaluation suite: MPJPE, Fréchet distance, R-precision, MMDist, Diversity,
//! plus a handcrafted kinematic feature extractor for desk-scale runs.

pub mod extractor;
pub mod frechet;
pub mod mpjpe;
pub mod report;
pub mod retrieval;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("retrieval pool needs {need} paired samples, got {got}")]
    InsufficientPool { got: usize, need: usize },
    #[error("diversity needs {need} samples, got {got}")]
    InsufficientSamples { got: usize, need: usize },
}

pub use extractor::{FeatureExtractor, KinematicExtractor};
pub use frechet::{frechet_distance, gaussian_fit};
pub use mpjpe::mpjpe;
pub use report::EvalReport;
pub use retrieval::{diversity, mm_dist, r_precision};
