//! Relaxed answer accuracy and the assignment-based extraction score.

mod assignment;
mod extraction;
mod relaxed;

pub use assignment::{brute_force_assignment, solve_assignment, Assignment};
pub use extraction::{extraction_score, score_chart, value_distance, ChartScore, ExtractionScore, PAD_COST};
pub use relaxed::{normalize_text, relaxed_accuracy, relaxed_match, relaxed_match_answers, MatchReason, MatchVerdict};

use thiserror::Error;

/// Default relative tolerance for numeric answers.
pub const RELAXED_TOLERANCE: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },
    #[error("cost matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("chart {0} has neither gold nor predicted values")]
    EmptyChart(String),
    #[error("no charts to score")]
    NoCharts,
    #[error("{predictions} predictions for {golds} gold answers")]
    LengthMismatch { predictions: usize, golds: usize },
}
