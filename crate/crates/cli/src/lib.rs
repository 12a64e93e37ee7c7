//! Dataset index handling, corpus statistics, synthetic-corpus generation,
//! stick-figure rendering, and the command-line surface built on top.

pub mod dedup;
pub mod index;
pub mod render;
pub mod stats;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid index: {0}")]
    BadIndex(String),
    #[error("missing files referenced by the index: {0:?}")]
    MissingFiles(Vec<String>),
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error(transparent)]
    Core(#[from] motok_core::CoreError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub use dedup::{cross_split_duplicates, DuplicateReport};
pub use index::{DatasetIndex, IndexRecord, Split, SplitRatios};
pub use render::render_svg;
pub use stats::{corpus_stats, StatsReport};
pub use synth::{gen_synthetic, SynthConfig};
