//! Static SVG drawing of a simulation step: tissue bands, the needle, its
//! base and tip, and the constraint points.

use std::fmt::Write as _;

use nalgebra::{Point2, Vector2};

use crate::tissue::{Boundary, OgdenLayer};
use crate::trace::TraceRecord;

const BAND_COLOURS: [&str; 6] = ["#f3e0c7", "#e8b4a0", "#f6efd9", "#d9a6b3", "#e6d3b3", "#c9b1d0"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotOptions {
    pub width_px: f64,
    /// Margin around the drawn objects (m).
    pub margin: f64,
    /// Draw the whole needle or only the part near the tissue.
    pub full_needle: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            width_px: 900.0,
            margin: 0.01,
            full_needle: false,
        }
    }
}

/// Keeps the part of `polygon` on the side `(p − b.point)·b.normal ≥ 0`
/// (`keep_inside`) or `< 0`.
fn clip(polygon: &[Point2<f64>], b: &Boundary, keep_inside: bool) -> Vec<Point2<f64>> {
    let sd = |p: &Point2<f64>| {
        let d = b.signed_distance(p);
        if keep_inside {
            d
        } else {
            -d
        }
    };
    let mut out = Vec::new();
    for i in 0..polygon.len() {
        let (a, c) = (polygon[i], polygon[(i + 1) % polygon.len()]);
        let (da, dc) = (sd(&a), sd(&c));
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (dc >= 0.0) {
            let t = da / (da - dc);
            out.push(a + (c - a) * t);
        }
    }
    out
}

fn path(points: &[Point2<f64>], map: &impl Fn(&Point2<f64>) -> (f64, f64)) -> String {
    let mut d = String::new();
    for (i, p) in points.iter().enumerate() {
        let (x, y) = map(p);
        let _ = write!(d, "{}{x:.2},{y:.2} ", if i == 0 { "M" } else { "L" });
    }
    d
}

pub fn render_svg(record: &TraceRecord, layers: &[OgdenLayer], options: &PlotOptions) -> String {
    let needle: Vec<Point2<f64>> = record.polyline.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    let constraints: Vec<Point2<f64>> = record.constraints.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    let tip = Point2::new(record.tip.x, record.tip.y);

    let mut focus: Vec<Point2<f64>> = constraints.clone();
    focus.push(tip);
    focus.extend(layers.iter().map(|l| l.boundary.point));
    if options.full_needle {
        focus.extend(needle.iter().copied());
    } else {
        let dir = Vector2::new(record.tip.heading.cos(), record.tip.heading.sin());
        focus.push(tip - dir * 0.03);
        focus.push(layers.first().map_or(tip, |l| l.boundary.point) - dir * 0.01);
    }
    let (mut lo, mut hi) = (focus[0], focus[0]);
    for p in &focus {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let m = options.margin;
    lo -= Vector2::new(m, m);
    hi += Vector2::new(m, m);
    let scale = options.width_px / (hi.x - lo.x);
    let height = (hi.y - lo.y) * scale;
    let map = |p: &Point2<f64>| ((p.x - lo.x) * scale, (hi.y - p.y) * scale);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.2} {:.2}">"#,
        options.width_px, height, options.width_px, height
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let view = [
        Point2::new(lo.x, lo.y),
        Point2::new(hi.x, lo.y),
        Point2::new(hi.x, hi.y),
        Point2::new(lo.x, hi.y),
    ];
    for (i, layer) in layers.iter().enumerate() {
        let mut band = clip(&view, &layer.boundary, true);
        if let Some(next) = layers.get(i + 1) {
            band = clip(&band, &next.boundary, false);
        }
        if band.len() >= 3 {
            let _ = writeln!(
                svg,
                r##"<path d="{}Z" fill="{}" stroke="#8a7a6a" stroke-width="0.5"><title>{} mu={} alpha={}</title></path>"##,
                path(&band, &map),
                BAND_COLOURS[i % BAND_COLOURS.len()],
                layer.name,
                layer.mu,
                layer.alpha
            );
        }
    }

    let colour = if record.report.converged { "#222222" } else { "#d08000" };
    let _ = writeln!(
        svg,
        r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#,
        path(&needle, &map)
    );
    for c in &constraints {
        let (x, y) = map(c);
        let _ = writeln!(
            svg,
            r##"<path d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#1f5fd0" stroke-width="1"/>"##,
            x - 3.0,
            y - 3.0,
            x + 3.0,
            y + 3.0,
            x - 3.0,
            y + 3.0,
            x + 3.0,
            y - 3.0
        );
    }
    if let Some(base) = needle.first() {
        let (x, y) = map(base);
        let _ = writeln!(svg, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#000000"/>"##);
    }
    let (x, y) = map(&tip);
    let _ = writeln!(svg, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#d01010"/>"##);
    let _ = writeln!(
        svg,
        r##"<text x="8" y="16" font-family="sans-serif" font-size="12">step {} depth {:.2} mm tip ({:.2}, {:.2}) mm</text>"##,
        record.step,
        record.depth * 1e3,
        record.tip.x * 1e3,
        record.tip.y * 1e3
    );
    svg.push_str("</svg>\n");
    svg
}
