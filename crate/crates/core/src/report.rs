//! Minimal SVG plots of trajectories and bifurcation grids.

use std::fmt::Write;

use crate::analysis::BifurcationGrid;
use crate::sim::Trajectory;

const W: f64 = 800.0;
const H: f64 = 500.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: (f64, f64), ys: (f64, f64)) -> Self {
        let pad = |lo: f64, hi: f64| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let (x0, x1) = pad(xs.0, xs.1);
        let (y0, y1) = pad(ys.0, ys.1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn open(&self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * MARGIN,
            H - 2.0 * MARGIN
        );
        let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 12.0, escape(xlabel));
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(ylabel)
        );
        for (v, anchor, x, y) in [
            (self.x0, "start", MARGIN, H - MARGIN + 15.0),
            (self.x1, "end", W - MARGIN, H - MARGIN + 15.0),
        ] {
            let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, short(v));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, H - MARGIN, short(self.y0));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 10.0, short(self.y1));
        s
    }
}

fn short(v: f64) -> String {
    format!("{v:.4}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `x_n` against `n` for every run, with optional horizontal bands drawn as
/// dashed lines at each band edge.
pub fn trajectory_svg(runs: &[Trajectory], bands: &[(f64, f64)], title: &str) -> String {
    let steps = runs.iter().map(Trajectory::steps).max().unwrap_or(1);
    let ys = range(runs.iter().flat_map(|t| t.values.iter().copied()).chain(bands.iter().flat_map(|&(a, b)| [a, b])));
    let frame = Frame::new((0.0, steps as f64), ys);
    let mut s = frame.open(title, "n", "x_n");
    for (i, t) in runs.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = write!(s, r#"<g fill="{color}">"#);
        for (n, &x) in t.values.iter().enumerate() {
            let _ = write!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1"/>"#, frame.px(n as f64), frame.py(x));
        }
        let _ = writeln!(s, "</g>");
    }
    for &(lo, hi) in bands {
        for y in [lo, hi] {
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN}" x2="{}" y1="{py:.2}" y2="{py:.2}" stroke="black" stroke-dasharray="4 3" stroke-width="0.7"/>"#,
                W - MARGIN,
                py = frame.py(y)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter of the post-transient samples against the swept parameter.
pub fn bifurcation_svg(grid: &BifurcationGrid, title: &str) -> String {
    let xs = range(grid.cells.iter().map(|c| c.value));
    let ys = range(grid.cells.iter().flat_map(|c| c.samples.iter().copied()));
    let frame = Frame::new(xs, ys);
    let mut s = frame.open(title, grid.param.name(), "x");
    let _ = write!(s, r#"<g fill="black" fill-opacity="0.6">"#);
    for cell in &grid.cells {
        for &x in &cell.samples {
            let _ = write!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="0.8"/>"#, frame.px(cell.value), frame.py(x));
        }
    }
    s.push_str("</g>\n</svg>\n");
    s
}
