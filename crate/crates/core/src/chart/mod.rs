//! Chart and table data model.
//!
//! A [`ChartSpec`] is the structured description of a chart image: the
//! detected marks (bars, line vertices, pie boundary points, legend swatches)
//! and the recognised text elements with their roles. A [`DataTable`] is the
//! fully-structured table a chart encodes. Geometry is in pixels with `y`
//! growing downward.

mod number;
mod raster;
mod spec;
mod table;

pub use number::{format_value, parse_number, NotNumeric};
pub use raster::{rasterize, Raster};
pub(crate) use raster::clock_angle;
pub use spec::{parse_chart_spec, validate as validate_spec, SpecError};
pub use table::{flatten_table, regroup_cells, DataTable, TableError, TableToken};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Bar,
    Line,
    Pie,
}

impl ChartType {
    pub const ALL: [ChartType; 3] = [ChartType::Bar, ChartType::Line, ChartType::Pie];

    pub fn as_str(&self) -> &'static str {
        match self {
            ChartType::Bar => "bar",
            ChartType::Line => "line",
            ChartType::Pie => "pie",
        }
    }
}

impl std::fmt::Display for ChartType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Bar,
    LinePoint,
    PieBoundaryPoint,
    LegendPreview,
}

impl MarkKind {
    /// Whether the mark encodes a data value (as opposed to a legend swatch).
    pub fn is_data(&self) -> bool {
        !matches!(self, MarkKind::LegendPreview)
    }

    pub fn wants_rect(&self) -> bool {
        matches!(self, MarkKind::Bar | MarkKind::LegendPreview)
    }
}

/// Rectangle for bars and legend swatches, point for line vertices and pie
/// boundary points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Geometry {
    Rect(Rect),
    Point(Point),
}

impl Geometry {
    pub fn center(&self) -> Point {
        match self {
            Geometry::Rect(r) => r.center(),
            Geometry::Point(p) => *p,
        }
    }

    pub fn as_rect(&self) -> Option<&Rect> {
        match self {
            Geometry::Rect(r) => Some(r),
            Geometry::Point(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub fn distance(&self, other: &Rgb) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mark {
    pub kind: MarkKind,
    pub geometry: Geometry,
    pub color: Rgb,
    /// Generator ground truth only; extraction never reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_hint: Option<String>,
}

/// The fifteen chart object classes a detector is trained to recognise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TextRole {
    Legend,
    #[serde(rename = "yAxisTitle")]
    YAxisTitle,
    ChartTitle,
    #[serde(rename = "xAxisTitle")]
    XAxisTitle,
    LegendPreview,
    PlotArea,
    #[serde(rename = "yAxisLabel")]
    YAxisLabel,
    #[serde(rename = "xAxisLabel")]
    XAxisLabel,
    LegendLabel,
    PieLabel,
    #[serde(rename = "bar")]
    Bar,
    #[serde(rename = "pie")]
    Pie,
    #[serde(rename = "pieSlice")]
    PieSlice,
    #[serde(rename = "line")]
    Line,
    #[serde(rename = "dotLine")]
    DotLine,
}

impl TextRole {
    pub const ALL: [TextRole; 15] = [
        TextRole::Legend,
        TextRole::YAxisTitle,
        TextRole::ChartTitle,
        TextRole::XAxisTitle,
        TextRole::LegendPreview,
        TextRole::PlotArea,
        TextRole::YAxisLabel,
        TextRole::XAxisLabel,
        TextRole::LegendLabel,
        TextRole::PieLabel,
        TextRole::Bar,
        TextRole::Pie,
        TextRole::PieSlice,
        TextRole::Line,
        TextRole::DotLine,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextElement {
    pub role: TextRole,
    pub text: String,
    pub bbox: Rect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub plot_area: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pie_center: Option<Point>,
    pub marks: Vec<Mark>,
    pub texts: Vec<TextElement>,
}

impl ChartSpec {
    pub fn texts_with_role(&self, role: TextRole) -> impl Iterator<Item = &TextElement> {
        self.texts.iter().filter(move |t| t.role == role)
    }

    pub fn marks_of_kind(&self, kind: MarkKind) -> impl Iterator<Item = (usize, &Mark)> {
        self.marks
            .iter()
            .enumerate()
            .filter(move |(_, m)| m.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart spec serializes")
    }
}
