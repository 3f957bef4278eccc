//! Chart-to-table reconstruction.
//!
//! Pipeline: fit a linear value scale to the numeric y-axis labels, value
//! each data-encoding mark, key marks to their nearest category label, then
//! match marks to legend entries by colour with alignment and proximity
//! fallbacks. Every fallback taken is recorded as a [`Diagnostic`].

mod associate;
mod scale;
mod table;
mod values;

pub use associate::{associate_categories, associate_series, LegendEntry, SeriesMatch};
pub use scale::{estimate_axis_scale, LinearScale, Orientation, ScaleFit};
pub use table::{extract_table, Extraction, DEFAULT_VALUE_HEADER};
pub use values::{bar_value, line_values, pie_slices, pie_values, PieSlice};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Euclidean RGB distance under which a mark matches a legend swatch.
pub const COLOR_MATCH_THRESHOLD: f64 = 30.0;
/// Pixel tolerance for bbox-centre alignment.
pub const ALIGNMENT_EPSILON: f64 = 5.0;
/// Minimum angular gap, in degrees, between pie boundary points.
pub const MIN_SLICE_DEGREES: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error("need at least 2 numeric y-axis labels, found {0}")]
    InsufficientLabels(usize),
    #[error("degenerate label geometry: {0}")]
    DegenerateGeometry(String),
    #[error("pie boundary points {0} and {1} coincide in angle")]
    DegenerateSlice(usize, usize),
    #[error("no category labels to associate marks with")]
    NoLabels,
    #[error("dual value axes are not supported")]
    DualAxis,
    #[error("chart has no data-encoding marks")]
    NoMarks,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMethod {
    ColorMatch,
    Alignment,
    Proximity,
    /// Single-series chart: no legend to match against.
    Implicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticEvent {
    FallbackAlignment,
    FallbackProximity,
    UnassignedMark,
    AmbiguousSeries,
    ColorAlignmentConflict,
    NonMonotoneAxis,
    SkippedLabel,
    CellConflict,
    DualAxis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub event: DiagnosticEvent,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(event: DiagnosticEvent, detail: impl Into<String>) -> Self {
        Self {
            event,
            detail: detail.into(),
        }
    }

    /// One JSON line: `{"chart_id", "event", "detail"}`.
    pub fn to_json_line(&self, chart_id: &str) -> String {
        serde_json::json!({
            "chart_id": chart_id,
            "event": self.event,
            "detail": self.detail,
        })
        .to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellAssignment {
    pub row: usize,
    pub col: usize,
    pub method: AssignMethod,
}

/// Where each data-encoding mark landed in the output table. Indices are
/// positions in `ChartSpec::marks`; `None` means the mark was not placed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesAssignment {
    pub entries: Vec<(usize, Option<CellAssignment>)>,
}

impl SeriesAssignment {
    pub fn get(&self, mark_index: usize) -> Option<CellAssignment> {
        self.entries
            .iter()
            .find(|(i, _)| *i == mark_index)
            .and_then(|(_, a)| *a)
    }

    pub fn unassigned(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .filter(|(_, a)| a.is_none())
            .map(|(i, _)| *i)
    }

    /// No two marks share a cell.
    pub fn is_injective(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.entries
            .iter()
            .filter_map(|(_, a)| a.map(|a| (a.row, a.col)))
            .all(|cell| seen.insert(cell))
    }
}
