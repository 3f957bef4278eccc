use super::{ExtractionError, LinearScale, MIN_SLICE_DEGREES};
use crate::chart::{clock_angle, Geometry, Mark, Point};

/// Value of a bar relative to the baseline. The edge farther from the
/// baseline is the value edge, so bars hanging below the baseline come out
/// negative on an upward-increasing axis.
pub fn bar_value(bar: &Mark, baseline: f64, scale: &LinearScale) -> f64 {
    let r = match bar.geometry {
        Geometry::Rect(r) => r,
        Geometry::Point(p) => return scale.value_at(p.y) - scale.value_at(baseline),
    };
    let top = r.y;
    let bottom = r.bottom();
    let edge = if (top - baseline).abs() >= (bottom - baseline).abs() {
        top
    } else {
        bottom
    };
    scale.value_at(edge) - scale.value_at(baseline)
}

/// Values of line vertices in left-to-right order.
pub fn line_values(points: &[Mark], scale: &LinearScale) -> Vec<f64> {
    let mut centers: Vec<Point> = points.iter().map(|m| m.geometry.center()).collect();
    centers.sort_by(|a, b| a.x.total_cmp(&b.x));
    centers.iter().map(|p| scale.value_at(p.y)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PieSlice {
    /// Index into the boundary slice passed to [`pie_slices`] of the point
    /// where this slice starts (clockwise).
    pub start_point: usize,
    pub start_deg: f64,
    pub sweep_deg: f64,
    pub percent: f64,
}

impl PieSlice {
    pub fn mid_deg(&self) -> f64 {
        (self.start_deg + self.sweep_deg / 2.0) % 360.0
    }
}

/// Slices between consecutive boundary points, clockwise from 12 o'clock.
pub fn pie_slices(boundary: &[Mark], center: Point) -> Result<Vec<PieSlice>, ExtractionError> {
    let mut angles: Vec<(usize, f64)> = boundary
        .iter()
        .enumerate()
        .map(|(i, m)| (i, clock_angle(center, m.geometry.center())))
        .collect();
    angles.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let n = angles.len();
    let mut slices = Vec::with_capacity(n);
    for k in 0..n {
        let (i, a) = angles[k];
        let (j, b) = angles[(k + 1) % n];
        let mut sweep = b - a;
        if k + 1 == n {
            sweep += 360.0;
        }
        if sweep < MIN_SLICE_DEGREES || (n == 1) {
            return Err(ExtractionError::DegenerateSlice(i.min(j), i.max(j)));
        }
        slices.push(PieSlice {
            start_point: i,
            start_deg: a,
            sweep_deg: sweep,
            percent: sweep / 360.0 * 100.0,
        });
    }
    Ok(slices)
}

/// Slice percentages clockwise from 12 o'clock; they sum to 100.
pub fn pie_values(boundary: &[Mark], center: Point) -> Result<Vec<f64>, ExtractionError> {
    Ok(pie_slices(boundary, center)?
        .into_iter()
        .map(|s| s.percent)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{MarkKind, Rect, Rgb};

    fn bar(y: f64, h: f64) -> Mark {
        Mark {
            kind: MarkKind::Bar,
            geometry: Geometry::Rect(Rect::new(10.0, y, 20.0, h)),
            color: Rgb([0, 0, 0]),
            series_hint: None,
        }
    }

    fn point(x: f64, y: f64, kind: MarkKind) -> Mark {
        Mark {
            kind,
            geometry: Geometry::Point(Point::new(x, y)),
            color: Rgb([0, 0, 0]),
            series_hint: None,
        }
    }

    fn at_angle(deg: f64) -> Mark {
        let r = 100.0;
        let t = deg.to_radians();
        point(200.0 + r * t.sin(), 200.0 - r * t.cos(), MarkKind::PieBoundaryPoint)
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn bar_values() {
        let scale = LinearScale::new(-1.0, 200.0);
        assert_eq!(bar_value(&bar(100.0, 100.0), 200.0, &scale), 100.0);
        assert_eq!(bar_value(&bar(200.0, 0.0), 200.0, &scale), 0.0);
        // hanging below the baseline
        assert_eq!(bar_value(&bar(200.0, 30.0), 200.0, &scale), -30.0);
    }

    #[test]
    fn bar_shift_is_linear_in_slope() {
        let scale = LinearScale::new(-0.25, 120.0);
        let base = bar_value(&bar(300.0, 180.0), 480.0, &scale);
        for k in [1.0, 7.0, 40.0] {
            let shifted = bar_value(&bar(300.0 - k, 180.0 + k), 480.0, &scale);
            assert!((shifted - base - k * 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn line_points_follow_x_order() {
        let scale = LinearScale::new(-1.0, 200.0);
        let pts = [
            point(30.0, 150.0, MarkKind::LinePoint),
            point(10.0, 113.0, MarkKind::LinePoint),
            point(20.0, 113.0, MarkKind::LinePoint),
        ];
        assert_eq!(line_values(&pts, &scale), vec![87.0, 87.0, 50.0]);
    }

    #[test]
    fn pie_halves_and_quarters() {
        let c = Point::new(200.0, 200.0);
        assert!(close(&pie_values(&[at_angle(0.0), at_angle(180.0)], c).unwrap(), &[50.0, 50.0]));
        let four: Vec<_> = [0.0, 90.0, 180.0, 270.0].map(at_angle).to_vec();
        assert!(close(&pie_values(&four, c).unwrap(), &[25.0; 4]));
        let three: Vec<_> = [0.0, 90.0, 180.0].map(at_angle).to_vec();
        assert!(close(&pie_values(&three, c).unwrap(), &[25.0, 25.0, 50.0]));
    }

    #[test]
    fn pie_input_order_is_irrelevant() {
        let c = Point::new(200.0, 200.0);
        let pts: Vec<_> = [180.0, 0.0, 90.0].map(at_angle).to_vec();
        let slices = pie_slices(&pts, c).unwrap();
        assert_eq!(slices[0].start_point, 1);
        assert!(close(
            &slices.iter().map(|s| s.percent).collect::<Vec<_>>(),
            &[25.0, 25.0, 50.0]
        ));
    }

    #[test]
    fn coincident_boundaries_are_degenerate() {
        let c = Point::new(200.0, 200.0);
        let pts = [at_angle(10.0), at_angle(10.05), at_angle(200.0)];
        assert!(matches!(
            pie_slices(&pts, c),
            Err(ExtractionError::DegenerateSlice(0, 1))
        ));
    }
}
