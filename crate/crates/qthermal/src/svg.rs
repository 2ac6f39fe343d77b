//! Minimal static SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// One polyline; `class` ends up on the `<path>` element.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub class: String,
    pub points: Vec<(f64, f64)>,
    /// Draw as a staircase (horizontal then vertical moves).
    pub steps: bool,
    pub markers: bool,
}

impl Series {
    pub fn line(label: impl Into<String>, class: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), class: class.into(), points, steps: false, markers: false }
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

fn transform(v: f64, scale: Scale) -> Option<f64> {
    match scale {
        Scale::Linear => v.is_finite().then_some(v),
        Scale::Log => (v > 0.0 && v.is_finite()).then(|| v.log10()),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale: Scale::Linear,
            y_scale: Scale::Linear,
            series: Vec::new(),
        }
    }

    fn bounds(&self) -> Option<((f64, f64), (f64, f64))> {
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter_map(|&(x, y)| Some((transform(x, self.x_scale)?, transform(y, self.y_scale)?)))
            .collect();
        if pts.is_empty() {
            return None;
        }
        let fold = |f: fn(&(f64, f64)) -> f64| {
            pts.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let pad = |(lo, hi): (f64, f64)| if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        Some((pad(fold(|p| p.0)), pad(fold(|p| p.1))))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 1.5);
        let _ = writeln!(out, r#"<path class="axes" d="M{x0} {y1} V{y0} H{x1}" stroke="black" fill="none"/>"#);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(&self.x_label));
        let _ = writeln!(
            out,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        );
        if let Some(((xa, xb), (ya, yb))) = self.bounds() {
            let px = |x: f64| x0 + (x - xa) / (xb - xa) * (x1 - x0);
            let py = |y: f64| y0 - (y - ya) / (yb - ya) * (y0 - y1);
            let tick = |v: f64, scale: Scale| match scale {
                Scale::Linear => format!("{v:.3}"),
                Scale::Log => format!("1e{v:.1}"),
            };
            for (v, anchor) in [(xa, "start"), (xb, "end")] {
                let _ = writeln!(out, r#"<text x="{:.2}" y="{}" text-anchor="{anchor}">{}</text>"#, px(v), y0 + 16.0, tick(v, self.x_scale));
            }
            for v in [ya, yb] {
                let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, py(v) + 4.0, tick(v, self.y_scale));
            }
            for (i, s) in self.series.iter().enumerate() {
                let colour = PALETTE[i % PALETTE.len()];
                let pts: Vec<(f64, f64)> = s
                    .points
                    .iter()
                    .filter_map(|&(x, y)| Some((px(transform(x, self.x_scale)?), py(transform(y, self.y_scale)?))))
                    .collect();
                if pts.is_empty() {
                    continue;
                }
                let mut d = format!("M{:.2} {:.2}", pts[0].0, pts[0].1);
                for &(x, y) in &pts[1..] {
                    if s.steps {
                        let _ = write!(d, " H{x:.2} V{y:.2}");
                    } else {
                        let _ = write!(d, " L{x:.2} {y:.2}");
                    }
                }
                let _ = writeln!(out, r#"<path class="{}" d="{d}" stroke="{colour}" stroke-width="1.5" fill="none"/>"#, escape(&s.class));
                if s.markers {
                    for (x, y) in &pts {
                        let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{colour}"/>"#);
                    }
                }
                let _ = writeln!(
                    out,
                    r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#,
                    x0 + 10.0,
                    y1 + 14.0 * (i as f64 + 1.0),
                    escape(&s.label)
                );
            }
        }
        out.push_str("</svg>\n");
        out
    }
}
