use serde::{Deserialize, Serialize};

use super::{HarnessError, MarkTruth};
use crate::chart::{
    ChartSpec, ChartType, DataTable, Geometry, Mark, MarkKind, Point, Rect, Rgb, TextElement, TextRole,
};

/// Named mark colours; every pair is more than 100 apart in RGB.
pub const PALETTE: [(&str, Rgb); 6] = [
    ("blue", Rgb([31, 119, 180])),
    ("orange", Rgb([255, 127, 14])),
    ("green", Rgb([44, 160, 44])),
    ("red", Rgb([200, 20, 40])),
    ("purple", Rgb([148, 103, 189])),
    ("black", Rgb([30, 30, 30])),
];

pub const CANVAS: (f64, f64) = (800.0, 600.0);
pub const PLOT_AREA: Rect = Rect {
    x: 80.0,
    y: 60.0,
    w: 640.0,
    h: 480.0,
};
const TICK_SPACING: f64 = 80.0;
const PIE_CENTER: Point = Point { x: 400.0, y: 320.0 };
const PIE_RADIUS: f64 = 200.0;
const PIE_LABEL_RADIUS: f64 = 245.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegendStyle {
    /// Single series or pie: nothing to match.
    None,
    /// Colour swatch next to each legend label.
    Swatches,
    /// Bars only: labels centred over the first group's bars, no swatches.
    AlignedLabels,
    /// Lines only: each label sits just right of its line's last vertex.
    LineEndLabels,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub spec: ChartSpec,
    pub truth: Vec<MarkTruth>,
}

fn text_width(s: &str) -> f64 {
    7.0 * s.chars().count() as f64 + 6.0
}

fn centred_text(role: TextRole, s: &str, cx: f64, cy: f64) -> TextElement {
    let w = text_width(s);
    TextElement {
        role,
        text: s.to_string(),
        bbox: Rect::new(cx - w / 2.0, cy - 8.0, w, 16.0),
    }
}

/// Lays out `table` on the fixed canvas. Bar and line values are drawn at
/// `unit` value per pixel from a baseline at the bottom of the plot area;
/// pie rows are slices in clockwise order from 12 o'clock. `colors[k]`
/// indexes [`PALETTE`] for column `k` (bar, line) or row `k` (pie).
pub fn lay_out(
    table: &DataTable,
    chart_type: ChartType,
    style: LegendStyle,
    colors: &[usize],
    title: &str,
    unit: f64,
) -> Result<Layout, HarnessError> {
    let needed = match chart_type {
        ChartType::Pie => table.n_rows(),
        _ => table.n_cols(),
    };
    if colors.len() < needed || colors.iter().any(|c| *c >= PALETTE.len()) {
        return Err(HarnessError::Config(format!("need {needed} palette indices, got {colors:?}")));
    }
    if table.n_rows() == 0 || table.n_cols() == 0 {
        return Err(HarnessError::Config("cannot lay out an empty table".into()));
    }
    if table.rows().iter().flatten().any(|c| c.is_none()) {
        return Err(HarnessError::Config("generated tables must be complete".into()));
    }
    let mut texts = vec![centred_text(TextRole::ChartTitle, title, CANVAS.0 / 2.0, 14.0)];
    match chart_type {
        ChartType::Pie => lay_out_pie(table, colors, texts),
        _ => {
            if !(unit.is_finite() && unit > 0.0) {
                return Err(HarnessError::Config(format!("value per pixel must be positive, got {unit}")));
            }
            let multi = table.n_cols() > 1;
            let style = match (multi, style, chart_type) {
                (false, _, _) => LegendStyle::None,
                (true, LegendStyle::None, _) => LegendStyle::Swatches,
                (true, LegendStyle::AlignedLabels, ChartType::Line) => LegendStyle::Swatches,
                (true, LegendStyle::LineEndLabels, ChartType::Bar) => LegendStyle::Swatches,
                (true, s, _) => s,
            };
            let axis_title = if multi { "Value" } else { table.col_headers()[0].as_str() };
            texts.push(TextElement {
                role: TextRole::YAxisTitle,
                text: axis_title.to_string(),
                bbox: Rect::new(4.0, 240.0, 16.0, 120.0),
            });
            lay_out_cartesian(table, chart_type, style, colors, unit, texts)
        }
    }
}

fn lay_out_cartesian(
    table: &DataTable,
    chart_type: ChartType,
    style: LegendStyle,
    colors: &[usize],
    unit: f64,
    mut texts: Vec<TextElement>,
) -> Result<Layout, HarnessError> {
    let baseline = PLOT_AREA.bottom();
    let ticks = (PLOT_AREA.h / TICK_SPACING) as usize;
    for k in 0..=ticks {
        let y = baseline - k as f64 * TICK_SPACING;
        let v = crate::chart::format_value(tick_value(k, unit));
        let w = text_width(&v);
        texts.push(TextElement {
            role: TextRole::YAxisLabel,
            text: v,
            bbox: Rect::new(PLOT_AREA.x - 8.0 - w, y - 8.0, w, 16.0),
        });
    }

    let (n, m) = (table.n_rows(), table.n_cols());
    let slot = PLOT_AREA.w / n as f64;
    let centers: Vec<f64> = (0..n).map(|i| PLOT_AREA.x + slot * (i as f64 + 0.5)).collect();
    for (i, label) in table.row_labels().iter().enumerate() {
        texts.push(centred_text(TextRole::XAxisLabel, label, centers[i], baseline + 16.0));
    }

    let mut marks = Vec::new();
    let mut truth = Vec::new();
    let mut mark_x = vec![vec![0.0; m]; n];
    let mut mark_y = vec![vec![0.0; m]; n];
    let group = (0.8 * slot).min(60.0 * m as f64);
    let bw = (group / m as f64).floor();
    for i in 0..n {
        let left = (centers[i] - bw * m as f64 / 2.0).round();
        for j in 0..m {
            let v = table.cell(i, j).expect("complete table");
            let px = (v / unit).round();
            if !(1.0..=PLOT_AREA.h).contains(&px) {
                return Err(HarnessError::Config(format!(
                    "value {v} at {unit} per pixel does not fit the plot area"
                )));
            }
            let (kind, geometry, cx) = match chart_type {
                ChartType::Bar => {
                    let x = left + j as f64 * bw;
                    let w = if m > 1 { bw - 2.0 } else { bw };
                    (MarkKind::Bar, Geometry::Rect(Rect::new(x, baseline - px, w, px)), x + w / 2.0)
                }
                _ => (
                    MarkKind::LinePoint,
                    Geometry::Point(Point::new(centers[i].round(), baseline - px)),
                    centers[i].round(),
                ),
            };
            mark_x[i][j] = cx;
            mark_y[i][j] = baseline - px;
            truth.push(MarkTruth {
                mark: marks.len(),
                row_label: table.row_labels()[i].clone(),
                col_header: table.col_headers()[j].clone(),
            });
            marks.push(Mark {
                kind,
                geometry,
                color: PALETTE[colors[j]].1,
                series_hint: Some(table.col_headers()[j].clone()),
            });
        }
    }

    let headers = table.col_headers();
    match style {
        LegendStyle::None => {}
        LegendStyle::Swatches => {
            let mut x = PLOT_AREA.x + 20.0;
            let start = x;
            for (j, h) in headers.iter().enumerate() {
                marks.push(Mark {
                    kind: MarkKind::LegendPreview,
                    geometry: Geometry::Rect(Rect::new(x, 32.0, 12.0, 12.0)),
                    color: PALETTE[colors[j]].1,
                    series_hint: Some(h.clone()),
                });
                let w = text_width(h);
                texts.push(TextElement {
                    role: TextRole::LegendLabel,
                    text: h.clone(),
                    bbox: Rect::new(x + 16.0, 30.0, w, 16.0),
                });
                x += 16.0 + w + 24.0;
            }
            texts.push(TextElement {
                role: TextRole::Legend,
                text: String::new(),
                bbox: Rect::new(start - 4.0, 28.0, x - start, 20.0),
            });
        }
        LegendStyle::AlignedLabels => {
            for (j, h) in headers.iter().enumerate() {
                texts.push(centred_text(TextRole::LegendLabel, h, mark_x[0][j], 38.0));
            }
        }
        LegendStyle::LineEndLabels => {
            for (j, h) in headers.iter().enumerate() {
                let w = text_width(h);
                texts.push(TextElement {
                    role: TextRole::LegendLabel,
                    text: h.clone(),
                    bbox: Rect::new(mark_x[n - 1][j] + 12.0, mark_y[n - 1][j] - 8.0, w, 16.0),
                });
            }
        }
    }
    Ok(Layout {
        spec: ChartSpec {
            chart_type,
            plot_area: PLOT_AREA,
            pie_center: None,
            marks,
            texts,
        },
        truth,
    })
}

/// Value printed at tick `k`; exact for units that are whole tenths.
pub(crate) fn tick_value(k: usize, unit: f64) -> f64 {
    let tenths = (unit * 10.0).round();
    if (tenths / 10.0 - unit).abs() < 1e-12 {
        (k as f64 * TICK_SPACING * tenths) / 10.0
    } else {
        k as f64 * TICK_SPACING * unit
    }
}

/// Point on the pie rim at clock angle `deg`.
fn boundary_point(deg: f64) -> Point {
    let t = deg.to_radians();
    Point::new(PIE_CENTER.x + PIE_RADIUS * t.sin(), PIE_CENTER.y - PIE_RADIUS * t.cos())
}

fn lay_out_pie(table: &DataTable, colors: &[usize], mut texts: Vec<TextElement>) -> Result<Layout, HarnessError> {
    let values: Vec<f64> = (0..table.n_rows()).map(|i| table.cell(i, 0).expect("complete table")).collect();
    let total: f64 = values.iter().sum();
    if values.iter().any(|v| *v <= 0.0) || total <= 0.0 {
        return Err(HarnessError::Config("pie slices must be positive".into()));
    }
    let mut marks = Vec::new();
    let mut truth = Vec::new();
    let mut start = 0.0;
    for (i, v) in values.iter().enumerate() {
        let sweep = v / total * 360.0;
        truth.push(MarkTruth {
            mark: marks.len(),
            row_label: table.row_labels()[i].clone(),
            col_header: table.col_headers()[0].clone(),
        });
        marks.push(Mark {
            kind: MarkKind::PieBoundaryPoint,
            geometry: Geometry::Point(boundary_point(start)),
            color: PALETTE[colors[i]].1,
            series_hint: Some(table.row_labels()[i].clone()),
        });
        let mid = (start + sweep / 2.0).to_radians();
        texts.push(centred_text(
            TextRole::PieLabel,
            &table.row_labels()[i],
            PIE_CENTER.x + PIE_LABEL_RADIUS * mid.sin(),
            PIE_CENTER.y - PIE_LABEL_RADIUS * mid.cos(),
        ));
        start += sweep;
    }
    Ok(Layout {
        spec: ChartSpec {
            chart_type: ChartType::Pie,
            plot_area: Rect::new(
                PIE_CENTER.x - PIE_LABEL_RADIUS - 60.0,
                PIE_CENTER.y - PIE_LABEL_RADIUS - 10.0,
                2.0 * PIE_LABEL_RADIUS + 120.0,
                2.0 * PIE_LABEL_RADIUS + 20.0,
            ),
            pie_center: Some(PIE_CENTER),
            marks,
            texts,
        },
        truth,
    })
}
