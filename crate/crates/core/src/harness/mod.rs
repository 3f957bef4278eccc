//! Synthetic chart/QA datasets, dataset IO and end-to-end evaluation.
//!
//! [`generate_dataset`] samples gold tables, lays them out as [`ChartSpec`]s
//! on a fixed 800x600 canvas, optionally perturbs the layout with a
//! [`NoiseModel`] and writes templated questions of the four question kinds,
//! each with the supervision that reproduces its answer. [`run_eval`] answers
//! every question from the gold or the extracted table and reports relaxed
//! accuracy by chart type and question kind.
//!
//! [`ChartSpec`]: crate::chart::ChartSpec

mod dataset;
mod eval;
mod layout;
mod noise;
mod questions;
mod rng;
mod screen;
mod training;
mod words;

pub use dataset::{generate_dataset, load_dataset, write_dataset, Dataset, DatasetManifest, GeneratedChart, ManifestEntry};
pub use eval::{run_eval, Answerer, EvalReport, ExampleResult, Pipeline, Stratum};
pub use layout::{lay_out, LegendStyle, Layout, PALETTE};
pub use noise::apply_noise;
pub use rng::Streams;
pub use screen::{run_filter, FilterReport, FilterRow};
pub use training::{build_vocab, gradcheck_probe, model_input, training_examples};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{SpecError, TableError};
use crate::neural::NeuralError;
use crate::qa::{Answer, SupervisionTarget};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Spec { path: String, source: SpecError },
    #[error("{path}: {source}")]
    Table { path: String, source: TableError },
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Question taxonomy: plain lookups, visual references (colour, position,
/// extremum), arithmetic over named cells, and both at once.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    DataRetrieval,
    Visual,
    Compositional,
    VisualCompositional,
}

impl QuestionKind {
    pub const ALL: [QuestionKind; 4] = [
        QuestionKind::DataRetrieval,
        QuestionKind::Visual,
        QuestionKind::Compositional,
        QuestionKind::VisualCompositional,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QuestionKind::DataRetrieval => "data_retrieval",
            QuestionKind::Visual => "visual",
            QuestionKind::Compositional => "compositional",
            QuestionKind::VisualCompositional => "visual_compositional",
        }
    }
}

impl std::fmt::Display for QuestionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

impl SplitTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAExample {
    pub chart_id: String,
    pub question: String,
    pub gold_answer: Answer,
    pub kind: QuestionKind,
    /// Absent exactly for planted unanswerable questions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supervision: Option<SupervisionTarget>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unanswerable: bool,
}

/// Which table cell a data mark encodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkTruth {
    pub mark: usize,
    pub row_label: String,
    pub col_header: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Gaussian jitter of mark keypoints, in pixels.
    pub keypoint_sigma: f64,
    /// Gaussian jitter of data-mark colour channels.
    pub color_sigma: f64,
    /// Probability that a category or legend label is lost.
    pub label_dropout: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NONE
    }
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        keypoint_sigma: 0.0,
        color_sigma: 0.0,
        label_dropout: 0.0,
    };

    pub fn validate(&self) -> Result<(), HarnessError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.keypoint_sigma) || !ok(self.color_sigma) || !ok(self.label_dropout) || self.label_dropout > 1.0 {
            return Err(HarnessError::Config(format!("noise parameters must be >= 0 (dropout <= 1): {self:?}")));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::NONE
    }
}

/// Relative weights of the four question kinds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindMix {
    pub data_retrieval: f64,
    pub visual: f64,
    pub compositional: f64,
    pub visual_compositional: f64,
}

impl Default for KindMix {
    /// 13.0 / 10.7 / 43.0 / 33.3 percent.
    fn default() -> Self {
        Self {
            data_retrieval: 13.0,
            visual: 10.7,
            compositional: 43.0,
            visual_compositional: 33.3,
        }
    }
}

impl KindMix {
    pub fn weights(&self) -> [f64; 4] {
        [self.data_retrieval, self.visual, self.compositional, self.visual_compositional]
    }
}

/// Relative chart counts per type: bar 3114, line 1032,
/// pie 658.
pub const CHART_TYPE_WEIGHTS: [f64; 3] = [3114.0, 1032.0, 658.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub bars: usize,
    pub lines: usize,
    pub pies: usize,
    pub questions_per_chart: usize,
    pub kind_mix: KindMix,
    /// Fraction of questions replaced by planted unanswerable ones.
    pub unanswerable_fraction: f64,
    pub min_rows: usize,
    pub max_rows: usize,
    pub max_series: usize,
    /// Share of multi-series bar and line charts laid out without legend
    /// swatches (aligned labels for bars, line-end labels for lines).
    pub swatchless_fraction: f64,
    /// Train / validation / test shares; the remainder after the first two
    /// goes to test.
    pub train_fraction: f64,
    pub validation_fraction: f64,
    /// Side of the square raster written next to each chart, if any.
    pub raster_size: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::with_total_charts(100)
    }
}

impl DatasetConfig {
    /// `n` charts split across types by [`CHART_TYPE_WEIGHTS`] (largest
    /// remainder).
    pub fn with_total_charts(n: usize) -> Self {
        let total: f64 = CHART_TYPE_WEIGHTS.iter().sum();
        let exact: Vec<f64> = CHART_TYPE_WEIGHTS.iter().map(|w| w / total * n as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|a, b| (exact[*b] - exact[*b].floor()).total_cmp(&(exact[*a] - exact[*a].floor())).then(a.cmp(b)));
        let missing = n - counts.iter().sum::<usize>();
        for i in order.into_iter().take(missing) {
            counts[i] += 1;
        }
        Self {
            bars: counts[0],
            lines: counts[1],
            pies: counts[2],
            questions_per_chart: 5,
            kind_mix: KindMix::default(),
            unanswerable_fraction: 0.0,
            min_rows: 3,
            max_rows: 8,
            max_series: 3,
            swatchless_fraction: 0.2,
            train_fraction: 0.8,
            validation_fraction: 0.1,
            raster_size: None,
        }
    }

    pub fn total_charts(&self) -> usize {
        self.bars + self.lines + self.pies
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        let weights = self.kind_mix.weights();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return fail("question kind weights must be >= 0 with a positive sum".into());
        }
        let frac = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !frac(self.unanswerable_fraction) || !frac(self.swatchless_fraction) {
            return fail("fractions must lie in [0, 1]".into());
        }
        if !frac(self.train_fraction) || !frac(self.validation_fraction) || self.train_fraction + self.validation_fraction > 1.0 + 1e-12 {
            return fail("split fractions must lie in [0, 1] and sum to at most 1".into());
        }
        if self.min_rows < 3 || self.min_rows > self.max_rows {
            return fail(format!("row range {}..={} needs 3 <= min <= max", self.min_rows, self.max_rows));
        }
        if self.max_rows > 12 {
            return fail(format!("at most 12 rows per chart, asked for {}", self.max_rows));
        }
        if self.max_series == 0 || self.max_series > layout::PALETTE.len().min(3) {
            return fail(format!("max_series must be 1..=3, got {}", self.max_series));
        }
        if let Some(s) = self.raster_size {
            if s == 0 || s % 16 != 0 {
                return fail(format!("raster size {s} must be a positive multiple of 16"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_split_follows_weights() {
        let c = DatasetConfig::with_total_charts(300);
        assert_eq!(c.total_charts(), 300);
        assert_eq!((c.bars, c.lines, c.pies), (195, 64, 41));
        let c = DatasetConfig::with_total_charts(1);
        assert_eq!((c.bars, c.lines, c.pies), (1, 0, 0));
    }

    #[test]
    fn noise_must_be_non_negative() {
        assert!(NoiseModel { keypoint_sigma: -1.0, ..NoiseModel::NONE }.validate().is_err());
        assert!(NoiseModel { label_dropout: 1.5, ..NoiseModel::NONE }.validate().is_err());
        NoiseModel { keypoint_sigma: 2.0, color_sigma: 8.0, label_dropout: 0.1 }.validate().unwrap();
    }

    #[test]
    fn config_limits() {
        DatasetConfig::default().validate().unwrap();
        assert!(DatasetConfig { max_rows: 13, ..DatasetConfig::default() }.validate().is_err());
        assert!(DatasetConfig { raster_size: Some(60), ..DatasetConfig::default() }.validate().is_err());
        assert!(DatasetConfig { train_fraction: 0.95, ..DatasetConfig::default() }.validate().is_err());
    }
}
