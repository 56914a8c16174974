//! Automatic metrics (ACC, F1, KF1, BLEU-1, Distinct-2, PPL) and human
//! evaluation aggregation. Every text metric works on characters.

pub mod human;
pub mod report;
pub mod text;

use thiserror::Error;

pub use crate::text::char_tokens;
pub use human::{aggregate_human_eval, HumanEvalRecord, HumanEvalRow, TopicClass, TurnScores};
pub use report::{
    decision_accuracy, echo_outputs, evaluate_split, examples_from_sessions, system_outputs, EvalExample, MetricReport,
    ReportSplit, SystemOutput,
};
pub use text::{bleu1, distinct2, kf1, unigram_f1, unigram_prf};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no examples")]
    Empty,
    #[error("group {0:?} has no records")]
    EmptyGroup(String),
    #[error("{0}")]
    OutOfRange(String),
}
