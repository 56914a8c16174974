//! Session corpus handling: JSONL storage, quality control, corpus
//! statistics, a seeded synthetic corpus generator, and topic-based splits.

pub mod io;
pub mod qc;
pub mod split;
pub mod stats;
pub mod synth;

use thiserror::Error;

pub use io::{load, parse_jsonl, save, to_jsonl};
pub use qc::{qc_all, qc_check, BannedPhrases, QcConfig, QcReport, Violation, DEFAULT_COPY_THRESHOLD};
pub use split::{split, SplitConfig, SplitOutcome, SplitWarning};
pub use stats::{stats, StatsTable, TopicCounts};
pub use synth::{synth_generate, SynthKnobs};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Decode { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("infeasible knobs: {0}")]
    InfeasibleKnobs(String),
    #[error("holdout topic {0:?} does not occur in the corpus")]
    UnknownHoldout(String),
    #[error(transparent)]
    Model(#[from] crate::types::ModelError),
}
