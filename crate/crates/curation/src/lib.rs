//! Data curation: keypoint-track quality filters, kinematic plausibility
//! scoring, long-horizon motion concatenation, and text merging.

pub mod concat;
pub mod filter;
pub mod plausibility;
pub mod text;

pub use concat::{apply_yaw_translation, concat_motions, ConcatResult, SeamReport, TransitionConfig};
pub use filter::{filter_track, FilterCriteria, FilterDecision, KeypointFrame, KeypointTrack, RejectionReason};
pub use plausibility::{
    foot_slide_score, jitter_score, penetration_score, score_motion, PlausibilityReport,
    PlausibilityThresholds,
};
pub use text::merge_texts;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("malformed track: {0}")]
    MalformedTrack(String),
    #[error("motion too short: T={0} < {1}")]
    TooShort(usize, usize),
    #[error("fps mismatch: {0} vs {1}")]
    FpsMismatch(f64, f64),
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Core(#[from] motok_core::CoreError),
    #[error("parse: {0}")]
    Parse(String),
}
