use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::chart::parse_number;
use crate::qa::Answer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchReason {
    NumericWithinTol,
    ExactText,
    NumericOutOfTol,
    TextMismatch,
    /// One side numeric, the other not.
    TypeMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchVerdict {
    pub correct: bool,
    pub reason: MatchReason,
}

pub fn normalize_text(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Numeric answers are correct within `tol` relative to `gold`; anything else
/// needs a case-insensitive exact match.
pub fn relaxed_match(pred: &str, gold: &str, tol: f64) -> MatchVerdict {
    let verdict = |correct, reason| MatchVerdict { correct, reason };
    match (parse_number(pred), parse_number(gold)) {
        (Ok(p), Ok(g)) => {
            let ok = if g == 0.0 { p == 0.0 } else { (p - g).abs() <= tol * g.abs() };
            if ok {
                verdict(true, MatchReason::NumericWithinTol)
            } else {
                verdict(false, MatchReason::NumericOutOfTol)
            }
        }
        (p, g) => {
            if normalize_text(pred) == normalize_text(gold) {
                verdict(true, MatchReason::ExactText)
            } else if p.is_ok() != g.is_ok() {
                verdict(false, MatchReason::TypeMismatch)
            } else {
                verdict(false, MatchReason::TextMismatch)
            }
        }
    }
}

pub fn relaxed_match_answers(pred: &Answer, gold: &Answer, tol: f64) -> MatchVerdict {
    relaxed_match(&pred.to_string(), &gold.to_string(), tol)
}

/// Fraction of predictions matching their gold answer. Empty input scores 0.
pub fn relaxed_accuracy<P: AsRef<str>, G: AsRef<str>>(
    predictions: &[P],
    golds: &[G],
    tol: f64,
) -> Result<f64, MetricsError> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Ok(0.0);
    }
    let hits = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| relaxed_match(p.as_ref(), g.as_ref(), tol).correct)
        .count();
    Ok(hits as f64 / golds.len() as f64)
}
