use super::{
    associate_categories, associate_series, bar_value, estimate_axis_scale, pie_slices,
    AssignMethod, CellAssignment, Diagnostic, DiagnosticEvent, ExtractionError, SeriesAssignment,
};
use crate::chart::{ChartSpec, ChartType, DataTable, Mark, MarkKind, Point, TextElement, TextRole};

/// Header used for a single-series chart that has no value-axis title.
pub const DEFAULT_VALUE_HEADER: &str = "value";

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub table: DataTable,
    pub assignment: SeriesAssignment,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reconstructs the data table of a chart: categories become rows in
/// left-to-right order, series become columns in legend order. Marks that
/// cannot be placed leave null cells and a diagnostic.
pub fn extract_table(spec: &ChartSpec) -> Result<Extraction, ExtractionError> {
    match spec.chart_type {
        ChartType::Pie => extract_pie(spec),
        ChartType::Bar | ChartType::Line => extract_cartesian(spec),
    }
}

fn single_header(spec: &ChartSpec) -> String {
    spec.texts_with_role(TextRole::YAxisTitle)
        .next()
        .map(|t| t.text.clone())
        .unwrap_or_else(|| DEFAULT_VALUE_HEADER.to_string())
}

fn extract_cartesian(spec: &ChartSpec) -> Result<Extraction, ExtractionError> {
    let mut diags = Vec::new();
    let y_labels: Vec<TextElement> = spec.texts_with_role(TextRole::YAxisLabel).cloned().collect();

    let left = y_labels.iter().any(|t| t.bbox.center().x < spec.plot_area.x);
    let right = y_labels
        .iter()
        .any(|t| t.bbox.center().x > spec.plot_area.right());
    if left && right {
        return Err(ExtractionError::DualAxis);
    }

    let fit = estimate_axis_scale(&y_labels)?;
    for s in &fit.skipped {
        diags.push(Diagnostic::new(
            DiagnosticEvent::SkippedLabel,
            format!("y-axis label {s:?} is not numeric"),
        ));
    }
    if !fit.monotone {
        diags.push(Diagnostic::new(
            DiagnosticEvent::NonMonotoneAxis,
            "y-axis label values are not ordered with their positions",
        ));
    }
    let scale = fit.scale;
    let baseline = fit
        .anchors
        .iter()
        .find(|(_, v)| *v == 0.0)
        .map(|(y, _)| *y)
        .unwrap_or_else(|| spec.plot_area.bottom());

    let kind = match spec.chart_type {
        ChartType::Bar => MarkKind::Bar,
        _ => MarkKind::LinePoint,
    };
    let marks: Vec<(usize, &Mark)> = spec.marks_of_kind(kind).collect();
    if marks.is_empty() {
        return Err(ExtractionError::NoMarks);
    }
    let values: Vec<f64> = marks
        .iter()
        .map(|(_, m)| match kind {
            MarkKind::Bar => bar_value(m, baseline, &scale),
            _ => scale.value_at(m.geometry.center().y),
        })
        .collect();

    let mut x_labels: Vec<TextElement> = spec.texts_with_role(TextRole::XAxisLabel).cloned().collect();
    x_labels.sort_by(|a, b| a.bbox.center().x.total_cmp(&b.bbox.center().x));
    let centers: Vec<Point> = marks.iter().map(|(_, m)| m.geometry.center()).collect();
    let mark_x: Vec<f64> = centers.iter().map(|c| c.x).collect();
    let categories = associate_categories(&mark_x, &x_labels)?;

    let previews: Vec<(usize, &Mark)> = spec.marks_of_kind(MarkKind::LegendPreview).collect();
    let legend_labels: Vec<TextElement> =
        spec.texts_with_role(TextRole::LegendLabel).cloned().collect();
    let (legend, series, series_diags) =
        associate_series(&marks, &categories, &previews, &legend_labels);
    diags.extend(series_diags);

    let headers: Vec<String> = if legend.is_empty() {
        vec![single_header(spec)]
    } else {
        legend.iter().map(|e| e.label.clone()).collect()
    };
    let row_labels: Vec<String> = x_labels.iter().map(|t| t.text.clone()).collect();

    let placements: Vec<Option<(usize, usize, AssignMethod, f64)>> = (0..marks.len())
        .map(|k| {
            series[k].map(|s| {
                let d = (x_labels[categories[k]].bbox.center().x - mark_x[k]).abs();
                (categories[k], s.series, s.method, d)
            })
        })
        .collect();
    fill_grid(spec_marks(&marks), &values, placements, headers, row_labels, diags)
}

fn spec_marks(marks: &[(usize, &Mark)]) -> Vec<usize> {
    marks.iter().map(|(i, _)| *i).collect()
}

/// Places values into the grid; when two marks claim a cell the one closer
/// to its category label keeps it.
fn fill_grid(
    mark_ids: Vec<usize>,
    values: &[f64],
    placements: Vec<Option<(usize, usize, AssignMethod, f64)>>,
    headers: Vec<String>,
    row_labels: Vec<String>,
    mut diags: Vec<Diagnostic>,
) -> Result<Extraction, ExtractionError> {
    let mut owner: Vec<Vec<Option<(usize, f64)>>> = vec![vec![None; headers.len()]; row_labels.len()];
    let mut order: Vec<usize> = (0..mark_ids.len()).collect();
    order.sort_by(|a, b| {
        let da = placements[*a].map_or(f64::INFINITY, |p| p.3);
        let db = placements[*b].map_or(f64::INFINITY, |p| p.3);
        da.total_cmp(&db).then(a.cmp(b))
    });
    let mut result: Vec<Option<CellAssignment>> = vec![None; mark_ids.len()];
    for k in order {
        let Some((row, col, method, d)) = placements[k] else {
            diags.push(Diagnostic::new(
                DiagnosticEvent::UnassignedMark,
                format!("mark {} matched no series", mark_ids[k]),
            ));
            continue;
        };
        if let Some((other, _)) = owner[row][col] {
            diags.push(Diagnostic::new(
                DiagnosticEvent::CellConflict,
                format!(
                    "mark {} and mark {} both map to ({row}, {col}); keeping mark {}",
                    mark_ids[other], mark_ids[k], mark_ids[other]
                ),
            ));
            diags.push(Diagnostic::new(
                DiagnosticEvent::UnassignedMark,
                format!("mark {} lost its cell to mark {}", mark_ids[k], mark_ids[other]),
            ));
            continue;
        }
        owner[row][col] = Some((k, d));
        result[k] = Some(CellAssignment { row, col, method });
    }
    let cells = owner
        .iter()
        .map(|r| r.iter().map(|o| o.map(|(k, _)| values[k])).collect())
        .collect();
    let table = DataTable::new(headers, row_labels, cells)
        .map_err(|e| ExtractionError::DegenerateGeometry(e.to_string()))?;
    Ok(Extraction {
        table,
        assignment: SeriesAssignment {
            entries: mark_ids.into_iter().zip(result).collect(),
        },
        diagnostics: diags,
    })
}

fn extract_pie(spec: &ChartSpec) -> Result<Extraction, ExtractionError> {
    let center = spec
        .pie_center
        .ok_or_else(|| ExtractionError::DegenerateGeometry("pie without centre".into()))?;
    let boundary: Vec<(usize, &Mark)> = spec.marks_of_kind(MarkKind::PieBoundaryPoint).collect();
    let owned: Vec<Mark> = boundary.iter().map(|(_, m)| (*m).clone()).collect();
    let slices = pie_slices(&owned, center)?;
    let labels: Vec<&TextElement> = spec.texts_with_role(TextRole::PieLabel).collect();
    if labels.is_empty() {
        return Err(ExtractionError::NoLabels);
    }
    let radius =
        owned.iter().map(|m| m.geometry.center().distance(&center)).sum::<f64>() / owned.len() as f64;

    let mut row_labels = Vec::with_capacity(slices.len());
    let mut values = Vec::with_capacity(slices.len());
    let mut entries = Vec::with_capacity(slices.len());
    for (row, s) in slices.iter().enumerate() {
        let t = s.mid_deg().to_radians();
        let anchor = Point::new(center.x + radius * t.sin(), center.y - radius * t.cos());
        let label = labels
            .iter()
            .min_by(|a, b| {
                a.bbox
                    .center()
                    .distance(&anchor)
                    .total_cmp(&b.bbox.center().distance(&anchor))
            })
            .expect("labels non-empty");
        row_labels.push(label.text.clone());
        values.push(s.percent);
        entries.push((
            boundary[s.start_point].0,
            Some(CellAssignment {
                row,
                col: 0,
                method: AssignMethod::Implicit,
            }),
        ));
    }
    let cells = values.into_iter().map(|v| vec![Some(v)]).collect();
    let table = DataTable::new(vec![single_header(spec)], row_labels, cells)
        .map_err(|e| ExtractionError::DegenerateGeometry(e.to_string()))?;
    Ok(Extraction {
        table,
        assignment: SeriesAssignment { entries },
        diagnostics: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Geometry, Rect, Rgb};

    fn text(role: TextRole, s: &str, cx: f64, cy: f64) -> TextElement {
        TextElement {
            role,
            text: s.into(),
            bbox: Rect::new(cx - 20.0, cy - 10.0, 40.0, 20.0),
        }
    }

    fn bar(x: f64, top: f64, rgb: [u8; 3]) -> Mark {
        Mark {
            kind: MarkKind::Bar,
            geometry: Geometry::Rect(Rect::new(x, top, 20.0, 500.0 - top)),
            color: Rgb(rgb),
            series_hint: None,
        }
    }

    fn swatch(x: f64, rgb: [u8; 3]) -> Mark {
        Mark {
            kind: MarkKind::LegendPreview,
            geometry: Geometry::Rect(Rect::new(x, 20.0, 12.0, 12.0)),
            color: Rgb(rgb),
            series_hint: None,
        }
    }

    const A: [u8; 3] = [31, 119, 180];
    const B: [u8; 3] = [255, 127, 14];

    fn two_series_chart() -> ChartSpec {
        // axis: 0 at y=500, 100 at y=100 => 0.25 per pixel
        ChartSpec {
            chart_type: ChartType::Bar,
            plot_area: Rect::new(80.0, 60.0, 640.0, 440.0),
            pie_center: None,
            marks: vec![
                bar(100.0, 300.0, A),
                bar(120.0, 200.0, B),
                bar(300.0, 400.0, A),
                bar(320.0, 100.0, B),
                swatch(400.0, A),
                swatch(500.0, B),
            ],
            texts: vec![
                text(TextRole::YAxisLabel, "0", 50.0, 500.0),
                text(TextRole::YAxisLabel, "50", 50.0, 300.0),
                text(TextRole::YAxisLabel, "100", 50.0, 100.0),
                text(TextRole::XAxisLabel, "Snapchat", 120.0, 520.0),
                text(TextRole::XAxisLabel, "Facebook", 320.0, 520.0),
                text(TextRole::LegendLabel, "2016", 436.0, 26.0),
                text(TextRole::LegendLabel, "2014", 536.0, 26.0),
            ],
        }
    }

    #[test]
    fn two_by_two_bar_chart() {
        let ex = extract_table(&two_series_chart()).unwrap();
        let expected = DataTable::new(
            vec!["2016".into(), "2014".into()],
            vec!["Snapchat".into(), "Facebook".into()],
            vec![vec![Some(50.0), Some(75.0)], vec![Some(25.0), Some(100.0)]],
        )
        .unwrap();
        assert_eq!(ex.table, expected);
        assert!(ex.assignment.is_injective());
        assert_eq!(ex.assignment.unassigned().count(), 0);
        assert!(ex.diagnostics.is_empty());
    }

    #[test]
    fn unmatched_bar_leaves_null_cell() {
        let mut spec = two_series_chart();
        spec.marks[3].color = Rgb([0, 0, 0]);
        let ex = extract_table(&spec).unwrap();
        assert_eq!(ex.table.cell(1, 1), None);
        assert_eq!(ex.table.cell(0, 1), Some(75.0));
        assert_eq!(ex.assignment.unassigned().collect::<Vec<_>>(), vec![3]);
        assert!(ex
            .diagnostics
            .iter()
            .any(|d| d.event == DiagnosticEvent::UnassignedMark));
    }

    #[test]
    fn single_series_header() {
        let mut spec = two_series_chart();
        spec.marks.retain(|m| m.color == Rgb(A) && m.kind == MarkKind::Bar);
        spec.texts.retain(|t| t.role != TextRole::LegendLabel);
        let ex = extract_table(&spec).unwrap();
        assert_eq!(ex.table.col_headers(), &["value".to_string()]);
        spec.texts.push(text(TextRole::YAxisTitle, "Share of users", 20.0, 300.0));
        let ex = extract_table(&spec).unwrap();
        assert_eq!(ex.table.col_headers(), &["Share of users".to_string()]);
    }

    #[test]
    fn dual_axis_rejected() {
        let mut spec = two_series_chart();
        spec.texts.push(text(TextRole::YAxisLabel, "10", 760.0, 300.0));
        assert_eq!(extract_table(&spec), Err(ExtractionError::DualAxis));
    }

    #[test]
    fn pie_chart_percentages() {
        let c = Point::new(400.0, 300.0);
        let at = |deg: f64| {
            let t = deg.to_radians();
            Mark {
                kind: MarkKind::PieBoundaryPoint,
                geometry: Geometry::Point(Point::new(c.x + 200.0 * t.sin(), c.y - 200.0 * t.cos())),
                color: Rgb(A),
                series_hint: None,
            }
        };
        let label = |s: &str, deg: f64| {
            let t = deg.to_radians();
            text(TextRole::PieLabel, s, c.x + 240.0 * t.sin(), c.y - 240.0 * t.cos())
        };
        let spec = ChartSpec {
            chart_type: ChartType::Pie,
            plot_area: Rect::new(80.0, 60.0, 640.0, 480.0),
            pie_center: Some(c),
            marks: vec![at(0.0), at(90.0), at(180.0)],
            texts: vec![label("a", 45.0), label("b", 135.0), label("c", 270.0)],
        };
        let ex = extract_table(&spec).unwrap();
        assert_eq!(ex.table.row_labels(), &["a", "b", "c"]);
        let vals = ex.table.values();
        assert!((vals.iter().sum::<f64>() - 100.0).abs() < 1e-6);
        assert!((vals[2] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let spec = two_series_chart();
        assert_eq!(extract_table(&spec), extract_table(&spec));
    }
}
