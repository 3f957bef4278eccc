//! Solid-colour rasterization of a [`ChartSpec`] onto a square canvas.
//!
//! Marks are painted in their own colour on a white background and text boxes
//! as light grey blocks. The chart extent is scaled uniformly into the square
//! and centred.

use super::{ChartSpec, Geometry, MarkKind, Point};

/// Row-major `size x size x 3` raster with channels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub size: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn blank(size: usize) -> Self {
        Self {
            size,
            data: vec![1.0; size * size * 3],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.size + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, rgb: [f64; 3]) {
        if x < 0 || y < 0 || x >= self.size as i64 || y >= self.size as i64 {
            return;
        }
        let i = (y as usize * self.size + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Binary PPM (P6) encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.size, self.size).into_bytes();
        out.extend(
            self.data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
        out
    }
}

struct Transform {
    scale: f64,
    dx: f64,
    dy: f64,
}

impl Transform {
    fn apply(&self, p: Point) -> (f64, f64) {
        (p.x * self.scale + self.dx, p.y * self.scale + self.dy)
    }
}

fn extent(spec: &ChartSpec) -> (f64, f64) {
    let mut w = spec.plot_area.right();
    let mut h = spec.plot_area.bottom();
    for m in &spec.marks {
        let (x, y) = match m.geometry {
            Geometry::Rect(r) => (r.right(), r.bottom()),
            Geometry::Point(p) => (p.x, p.y),
        };
        w = w.max(x);
        h = h.max(y);
    }
    for t in &spec.texts {
        w = w.max(t.bbox.right());
        h = h.max(t.bbox.bottom());
    }
    (w.max(1.0), h.max(1.0))
}

pub fn rasterize(spec: &ChartSpec, size: usize) -> Raster {
    let mut img = Raster::blank(size);
    let (w, h) = extent(spec);
    let scale = size as f64 / w.max(h);
    let tf = Transform {
        scale,
        dx: (size as f64 - w * scale) / 2.0,
        dy: (size as f64 - h * scale) / 2.0,
    };
    let fill_rect = |img: &mut Raster, r: &super::Rect, rgb: [f64; 3]| {
        let (x0, y0) = tf.apply(Point::new(r.x, r.y));
        let (x1, y1) = tf.apply(Point::new(r.right(), r.bottom()));
        let (x0, y0) = (x0.floor() as i64, y0.floor() as i64);
        let (x1, y1) = ((x1.ceil() as i64).max(x0 + 1), (y1.ceil() as i64).max(y0 + 1));
        for y in y0..y1 {
            for x in x0..x1 {
                img.put(x, y, rgb);
            }
        }
    };

    for t in &spec.texts {
        fill_rect(&mut img, &t.bbox, [0.8, 0.8, 0.8]);
    }

    let to_rgb = |c: &super::Rgb| c.0.map(|v| f64::from(v) / 255.0);

    if let Some(center) = spec.pie_center {
        let mut bounds: Vec<(f64, [f64; 3], f64)> = spec
            .marks_of_kind(MarkKind::PieBoundaryPoint)
            .map(|(_, m)| {
                let p = m.geometry.center();
                (clock_angle(center, p), to_rgb(&m.color), center.distance(&p))
            })
            .collect();
        bounds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let radius = bounds.iter().map(|b| b.2).sum::<f64>() / bounds.len().max(1) as f64;
        let (cx, cy) = tf.apply(center);
        let r_px = radius * scale;
        for y in 0..size {
            for x in 0..size {
                let px = Point::new(x as f64 + 0.5, y as f64 + 0.5);
                if px.distance(&Point::new(cx, cy)) > r_px || bounds.is_empty() {
                    continue;
                }
                let a = clock_angle(Point::new(cx, cy), px);
                // slice owning angle a starts at the last boundary <= a
                let owner = bounds
                    .iter()
                    .rev()
                    .find(|b| b.0 <= a)
                    .unwrap_or(&bounds[bounds.len() - 1]);
                img.put(x as i64, y as i64, owner.1);
            }
        }
    }

    let mut line_points: Vec<(Point, [f64; 3])> = Vec::new();
    for m in &spec.marks {
        let rgb = to_rgb(&m.color);
        match (m.kind, &m.geometry) {
            (MarkKind::Bar | MarkKind::LegendPreview, Geometry::Rect(r)) => fill_rect(&mut img, r, rgb),
            (MarkKind::LinePoint, Geometry::Point(p)) => line_points.push((*p, rgb)),
            _ => {}
        }
    }
    // connect consecutive vertices of the same colour, left to right
    line_points.sort_by(|a, b| a.0.x.total_cmp(&b.0.x));
    let mut seen: Vec<[f64; 3]> = Vec::new();
    for (_, rgb) in &line_points {
        if !seen.contains(rgb) {
            seen.push(*rgb);
        }
    }
    for rgb in seen {
        let pts: Vec<(f64, f64)> = line_points
            .iter()
            .filter(|(_, c)| *c == rgb)
            .map(|(p, _)| tf.apply(*p))
            .collect();
        for p in &pts {
            img.put(p.0 as i64, p.1 as i64, rgb);
        }
        for seg in pts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                img.put(
                    (a.0 + t * (b.0 - a.0)) as i64,
                    (a.1 + t * (b.1 - a.1)) as i64,
                    rgb,
                );
            }
        }
    }
    img
}

/// Angle in degrees clockwise from 12 o'clock, in `[0, 360)`, for image
/// coordinates (y down).
pub(crate) fn clock_angle(center: Point, p: Point) -> f64 {
    let deg = (p.x - center.x).atan2(center.y - p.y).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}
