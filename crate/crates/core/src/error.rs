use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("degenerate 6d rotation: {0}")]
    DegenerateRotation(String),
    #[error("forward axis within tolerance of vertical, yaw undefined")]
    GimbalDegenerate,
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid motion: {0}")]
    InvalidMotion(String),
    #[error("motion file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
