//! Convergence curves as a standalone SVG document.
//!
//! Two panels share a log-scaled gradient-norm axis: against iteration
//! index on the left, against elapsed seconds on the right. Each algorithm
//! gets a shaded 10–90 % band and a solid median polyline per panel.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::bench::runner::{
    aggregate_by_iteration, aggregate_by_time, Algorithm, BandPoint, RunRecord,
};
use crate::error::{IcaError, Result};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 300.0;
const TOP: f64 = 50.0;
const LEFTS: [f64; 2] = [80.0, 550.0];
const TIME_POINTS: usize = 200;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

struct Axes {
    left: f64,
    x_max: f64,
    log_lo: f64,
    log_hi: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        self.left
            + PANEL_W
                * if self.x_max > 0.0 {
                    x / self.x_max
                } else {
                    0.0
                }
    }

    fn py(&self, g: f64) -> f64 {
        let l = g.max(10f64.powf(self.log_lo)).log10();
        TOP + PANEL_H * (self.log_hi - l) / (self.log_hi - self.log_lo)
    }
}

fn points(axes: &Axes, band: &[BandPoint], value: impl Fn(&BandPoint) -> f64) -> Vec<String> {
    band.iter()
        .map(|b| format!("{:.2},{:.2}", axes.px(b.x), axes.py(value(b))))
        .collect()
}

fn draw_panel(
    svg: &mut String,
    axes: &Axes,
    title: &str,
    x_label: &str,
    curves: &[(Algorithm, Vec<BandPoint>)],
) {
    let (l, r, t, b) = (axes.left, axes.left + PANEL_W, TOP, TOP + PANEL_H);
    let _ = writeln!(svg, r##"<g class="panel">"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{l}" y="{t}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"##,
        (l + r) / 2.0,
        t - 12.0,
        escape_xml(title)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"##,
        (l + r) / 2.0,
        b + 36.0,
        escape_xml(x_label)
    );
    for e in (axes.log_lo as i32)..=(axes.log_hi as i32) {
        let y = axes.py(10f64.powi(e));
        let _ = writeln!(
            svg,
            r##"<line x1="{l}" y1="{y:.2}" x2="{r}" y2="{y:.2}" stroke="#ddd"/><text x="{:.1}" y="{:.2}" text-anchor="end" font-size="10">1e{e}</text>"##,
            l - 4.0,
            y + 3.0
        );
    }
    for k in 0..=4 {
        let x = axes.x_max * k as f64 / 4.0;
        let label = if axes.x_max >= 10.0 {
            format!("{x:.0}")
        } else {
            format!("{x:.3}")
        };
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.1}" text-anchor="middle" font-size="10">{label}</text>"##,
            axes.px(x),
            b + 16.0
        );
    }
    for (idx, (algo, band)) in curves.iter().enumerate() {
        if band.is_empty() {
            continue;
        }
        let color = COLORS[idx % COLORS.len()];
        let mut outline = points(axes, band, |p| p.p90);
        outline.extend(points(axes, band, |p| p.p10).into_iter().rev());
        let _ = writeln!(
            svg,
            r##"<path class="band" data-algorithm="{name}" d="M {} Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"##,
            outline.join(" L "),
            name = algo.name()
        );
        let _ = writeln!(
            svg,
            r##"<polyline class="median" data-algorithm="{name}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
            points(axes, band, |p| p.median).join(" "),
            name = algo.name()
        );
    }
    let _ = writeln!(svg, "</g>");
}

/// Builds the SVG document for `records`.
pub fn svg_document(records: &[RunRecord]) -> Result<String> {
    if records.iter().all(|r| r.trace.is_empty()) {
        return Err(IcaError::InvalidSpec("no trace data to plot".into()));
    }
    let mut algorithms: Vec<Algorithm> = records.iter().map(|r| r.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();

    let by_iter: Vec<_> = algorithms
        .iter()
        .map(|&a| (a, aggregate_by_iteration(records, a)))
        .collect();
    let by_time: Vec<_> = algorithms
        .iter()
        .map(|&a| (a, aggregate_by_time(records, a, TIME_POINTS)))
        .collect();

    let positive = records
        .iter()
        .flat_map(|r| r.trace.records())
        .map(|r| r.grad_norm)
        .filter(|g| g.is_finite() && *g > 0.0);
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| {
        (lo.min(g), hi.max(g))
    });
    let (log_lo, log_hi) = if lo.is_finite() {
        (
            lo.log10().floor(),
            hi.log10().ceil().max(lo.log10().floor() + 1.0),
        )
    } else {
        (-1.0, 0.0)
    };
    let x_max = |curves: &[(Algorithm, Vec<BandPoint>)]| {
        curves
            .iter()
            .filter_map(|(_, b)| b.last().map(|p| p.x))
            .fold(0.0, f64::max)
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let panels = [
        ("Gradient norm vs iterations", "iteration", &by_iter),
        ("Gradient norm vs time", "elapsed (s)", &by_time),
    ];
    for (k, (title, label, curves)) in panels.into_iter().enumerate() {
        let axes = Axes {
            left: LEFTS[k],
            x_max: x_max(curves),
            log_lo,
            log_hi,
        };
        draw_panel(&mut svg, &axes, title, label, curves);
    }
    for (idx, algo) in algorithms.iter().enumerate() {
        let y = HEIGHT - 20.0;
        let x = LEFTS[0] + 140.0 * idx as f64;
        let color = COLORS[idx % COLORS.len()];
        let _ = writeln!(
            svg,
            r##"<g class="legend"><line x1="{x}" y1="{y}" x2="{:.1}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text></g>"##,
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape_xml(algo.name())
        );
    }
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

pub fn render_svg(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let path = path.as_ref();
    let doc = svg_document(records)?;
    fs::write(path, doc).map_err(|e| IcaError::io(path, e))
}
