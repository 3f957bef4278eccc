use thiserror::Error;

use super::{ChartSpec, ChartType, Geometry, MarkKind, TextRole};
use crate::chart::parse_number;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },
}

impl SpecError {
    pub fn path(&self) -> &str {
        match self {
            SpecError::Schema { path, .. } | SpecError::Invariant { path, .. } => path,
        }
    }
}

fn invariant(path: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError::Invariant {
        path: path.into(),
        message: message.into(),
    }
}

/// Parses and validates a chart description in the ChartSpec JSON schema.
pub fn parse_chart_spec(raw: &str) -> Result<ChartSpec, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(raw);
    let spec: ChartSpec = serde_path_to_error::deserialize(de).map_err(|e| SpecError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    validate(&spec)?;
    Ok(spec)
}

fn check_finite(path: &str, values: &[f64]) -> Result<(), SpecError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invariant(path, "non-finite coordinate"));
    }
    Ok(())
}

fn check_point(path: &str, p: &super::Point) -> Result<(), SpecError> {
    check_finite(path, &[p.x, p.y])?;
    if p.x < 0.0 || p.y < 0.0 {
        return Err(invariant(path, "point lies outside the image"));
    }
    Ok(())
}

fn check_rect(path: &str, r: &super::Rect) -> Result<(), SpecError> {
    check_finite(path, &[r.x, r.y, r.w, r.h])?;
    if r.w < 0.0 || r.h < 0.0 {
        return Err(invariant(path, "negative width or height"));
    }
    if r.x < 0.0 || r.y < 0.0 {
        return Err(invariant(path, "rectangle lies outside the image"));
    }
    Ok(())
}

/// Checks every ChartSpec invariant, naming the offending path on failure.
pub fn validate(spec: &ChartSpec) -> Result<(), SpecError> {
    check_rect("plot_area", &spec.plot_area)?;

    for (i, m) in spec.marks.iter().enumerate() {
        let path = format!("marks[{i}].geometry");
        match (&m.geometry, m.kind.wants_rect()) {
            (Geometry::Rect(r), true) => check_rect(&path, r)?,
            (Geometry::Point(p), false) => check_point(&path, p)?,
            (_, true) => return Err(invariant(path, format!("{:?} needs a rectangle", m.kind))),
            (_, false) => return Err(invariant(path, format!("{:?} needs a point", m.kind))),
        }
    }
    for (i, t) in spec.texts.iter().enumerate() {
        check_rect(&format!("texts[{i}].bbox"), &t.bbox)?;
    }

    match spec.chart_type {
        ChartType::Pie => {
            let center = spec
                .pie_center
                .ok_or_else(|| invariant("pie_center", "pie charts require a pie_center"))?;
            check_point("pie_center", &center)?;
            let n = spec.marks_of_kind(MarkKind::PieBoundaryPoint).count();
            if n < 2 {
                return Err(invariant(
                    "marks",
                    format!("pie charts need at least 2 boundary points, found {n}"),
                ));
            }
        }
        ChartType::Bar | ChartType::Line => {
            if spec.pie_center.is_some() {
                return Err(invariant("pie_center", "only pie charts carry a pie_center"));
            }
            let numeric = spec
                .texts_with_role(TextRole::YAxisLabel)
                .filter(|t| parse_number(&t.text).is_ok())
                .count();
            if numeric < 2 {
                return Err(invariant(
                    "texts",
                    format!("need at least 2 numeric yAxisLabel texts, found {numeric}"),
                ));
            }
        }
    }
    Ok(())
}
