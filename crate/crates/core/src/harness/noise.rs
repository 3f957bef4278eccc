use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::NoiseModel;
use crate::chart::{ChartSpec, Geometry, Point, Rect, Rgb, TextRole};

fn jitter(rng: &mut impl Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma is finite and positive").sample(rng)
}

fn jitter_color(rng: &mut impl Rng, c: Rgb, sigma: f64) -> Rgb {
    Rgb(c.0.map(|v| (f64::from(v) + jitter(rng, sigma)).round().clamp(0.0, 255.0) as u8))
}

/// Perturbs a laid-out chart: every mark keypoint (bar corners, line
/// vertices, pie boundary points, swatch corners) moves by Gaussian jitter,
/// data-mark colours are jittered per channel, and category, legend and pie
/// labels are dropped independently. Coordinates are clamped at 0.
pub fn apply_noise(spec: &ChartSpec, noise: &NoiseModel, rng: &mut impl Rng) -> ChartSpec {
    let mut out = spec.clone();
    if noise.is_zero() {
        return out;
    }
    let s = noise.keypoint_sigma;
    for m in &mut out.marks {
        m.geometry = match m.geometry {
            Geometry::Rect(r) => {
                let x0 = (r.x + jitter(rng, s)).max(0.0);
                let y0 = (r.y + jitter(rng, s)).max(0.0);
                let x1 = (r.right() + jitter(rng, s)).max(x0);
                let y1 = (r.bottom() + jitter(rng, s)).max(y0);
                Geometry::Rect(Rect::new(x0, y0, x1 - x0, y1 - y0))
            }
            Geometry::Point(p) => Geometry::Point(Point::new(
                (p.x + jitter(rng, s)).max(0.0),
                (p.y + jitter(rng, s)).max(0.0),
            )),
        };
        if m.kind.is_data() {
            m.color = jitter_color(rng, m.color, noise.color_sigma);
        }
    }
    if noise.label_dropout > 0.0 {
        let droppable = [TextRole::XAxisLabel, TextRole::LegendLabel, TextRole::PieLabel];
        out.texts
            .retain(|t| !droppable.contains(&t.role) || !rng.random_bool(noise.label_dropout));
    }
    out
}
