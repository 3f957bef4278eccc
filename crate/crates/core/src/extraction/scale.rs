use serde::{Deserialize, Serialize};

use super::ExtractionError;
use crate::chart::{parse_number, TextElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    IncreasingUp,
    IncreasingDown,
}

/// `value = slope * pixel_y + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearScale {
    pub slope: f64,
    pub intercept: f64,
    pub orientation: Orientation,
}

impl LinearScale {
    pub fn new(slope: f64, intercept: f64) -> Self {
        let orientation = if slope < 0.0 {
            Orientation::IncreasingUp
        } else {
            Orientation::IncreasingDown
        };
        Self {
            slope,
            intercept,
            orientation,
        }
    }

    pub fn value_at(&self, pixel_y: f64) -> f64 {
        self.slope * pixel_y + self.intercept
    }

    pub fn pixel_of(&self, value: f64) -> f64 {
        (value - self.intercept) / self.slope
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleFit {
    pub scale: LinearScale,
    /// Largest absolute residual over the labels used.
    pub max_residual: f64,
    /// False when label values are not ordered consistently with positions.
    pub monotone: bool,
    /// `(pixel_y, value)` anchors used for the fit.
    pub anchors: Vec<(f64, f64)>,
    /// Labels whose text did not parse.
    pub skipped: Vec<String>,
}

/// Least-squares fit of label value against bbox-centre pixel y.
///
/// Non-numeric labels are skipped. A non-monotone label sequence is reported
/// through [`ScaleFit::monotone`] while the best fit is still returned.
pub fn estimate_axis_scale(labels: &[TextElement]) -> Result<ScaleFit, ExtractionError> {
    let mut anchors = Vec::new();
    let mut skipped = Vec::new();
    for l in labels {
        match parse_number(&l.text) {
            Ok(v) => anchors.push((l.bbox.center().y, v)),
            Err(_) => skipped.push(l.text.clone()),
        }
    }
    if anchors.len() < 2 {
        return Err(ExtractionError::InsufficientLabels(anchors.len()));
    }
    anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = anchors.windows(2).find(|w| (w[1].0 - w[0].0).abs() < 1e-9) {
        return Err(ExtractionError::DegenerateGeometry(format!(
            "two labels centred at pixel y = {}",
            w[0].0
        )));
    }

    let n = anchors.len() as f64;
    let mean_y = anchors.iter().map(|a| a.0).sum::<f64>() / n;
    let mean_v = anchors.iter().map(|a| a.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(y, v) in &anchors {
        sxy += (y - mean_y) * (v - mean_v);
        sxx += (y - mean_y) * (y - mean_y);
    }
    let slope = sxy / sxx;
    if slope == 0.0 || !slope.is_finite() {
        return Err(ExtractionError::DegenerateGeometry(
            "labels carry identical values".into(),
        ));
    }
    let scale = LinearScale::new(slope, mean_v - slope * mean_y);

    let max_residual = anchors
        .iter()
        .map(|&(y, v)| (scale.value_at(y) - v).abs())
        .fold(0.0, f64::max);
    let direction = slope.signum();
    let monotone = anchors
        .windows(2)
        .all(|w| (w[1].1 - w[0].1) * direction > 0.0);

    Ok(ScaleFit {
        scale,
        max_residual,
        monotone,
        anchors,
        skipped,
    })
}
