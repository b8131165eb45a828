//! Minimal SVG bifurcation diagrams in the `(Lambda, J)` plane.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

#[derive(Debug, Clone, Default)]
pub struct Diagram {
    pub title: String,
    /// Symmetric curve, drawn dashed.
    pub symmetric: Vec<(f64, f64)>,
    /// Non-symmetric curve, drawn solid.
    pub non_symmetric: Vec<(f64, f64)>,
    /// Minimizing envelope, drawn dark on top.
    pub envelope: Vec<(f64, f64)>,
    /// Optional horizontal reference level.
    pub level: Option<f64>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

fn points_attr(frame: &Frame, pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (k, &(x, y)) in pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).enumerate() {
        if k > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", frame.x(x), frame.y(y));
    }
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Diagram {
    pub fn render(&self) -> String {
        let all = || self.symmetric.iter().chain(&self.non_symmetric).chain(&self.envelope);
        let (x0, x1) = bounds(all().map(|p| p.0));
        let (y0, y1) = bounds(all().map(|p| p.1).chain(self.level));
        let f = Frame { x0, x1, y0, y1 };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        // Axes and ticks.
        let (bx, by) = (MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            s,
            r#"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"#,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            s,
            r#"<line x1="{bx}" y1="{by}" x2="{bx}" y2="{MARGIN}" stroke="black"/>"#
        );
        for k in 0..=4 {
            let vx = x0 + (x1 - x0) * k as f64 / 4.0;
            let px = f.x(vx);
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{by}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{vx:.4}</text>"#,
                by + 5.0,
                by + 18.0
            );
            let vy = y0 + (y1 - y0) * k as f64 / 4.0;
            let py = f.y(vy);
            let _ = writeln!(
                s,
                r#"<line x1="{bx}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="black"/><text x="{}" y="{py:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{vy:.4}</text>"#,
                bx - 5.0,
                bx - 8.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">Lambda</text>"#,
            WIDTH / 2.0,
            HEIGHT - 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})">J</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
        if let Some(level) = self.level {
            let py = f.y(level);
            let _ = writeln!(
                s,
                r#"<line x1="{bx}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="gray" stroke-dasharray="1,3"/>"#,
                WIDTH - MARGIN
            );
        }
        let _ = writeln!(
            s,
            r#"<polyline class="symmetric" fill="none" stroke="steelblue" stroke-width="1.5" stroke-dasharray="6,4" points="{}"/>"#,
            points_attr(&f, &self.symmetric)
        );
        let _ = writeln!(
            s,
            r#"<polyline class="non-symmetric" fill="none" stroke="firebrick" stroke-width="1.5" points="{}"/>"#,
            points_attr(&f, &self.non_symmetric)
        );
        if !self.envelope.is_empty() {
            let pts = points_attr(&f, &self.envelope);
            let _ = writeln!(
                s,
                r#"<path class="envelope" fill="none" stroke="black" stroke-width="3" stroke-opacity="0.6" d="M {}"/>"#,
                pts.replacen(' ', " L ", usize::MAX)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
