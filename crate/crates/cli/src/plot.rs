// SPDX-License-Identifier: MIT OR Apache-2.0

//! Static SVG: the series on top, one panel per score track, labelled
//! anomaly runs shaded across every panel.

use std::fmt::Write;

const WIDTH: f64 = 1000.0;
const PANEL_HEIGHT: f64 = 150.0;
const GAP: f64 = 30.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Panel {
    pub title: String,
    pub lines: Vec<Vec<f64>>,
}

/// Half-open `[start, end)` runs of consecutive 1s.
pub fn label_runs(labels: &[u8]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (t, l) in labels.iter().enumerate() {
        match (*l == 1, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                runs.push((s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, labels.len()));
    }
    runs
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

pub fn render(panels: &[Panel], len: usize, labels: Option<&[u8]>) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let height = MARGIN_TOP + panels.len() as f64 * (PANEL_HEIGHT + GAP);
    let x_of = |t: f64| MARGIN_LEFT + if len > 1 { t / (len - 1) as f64 * plot_w } else { 0.0 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"##,
        w = WIDTH,
        h = fmt(height)
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{WIDTH}" height="{}" fill="white"/>"##, fmt(height));

    if let Some(labels) = labels {
        let bottom = height - GAP;
        for (s, e) in label_runs(labels) {
            let x0 = x_of(s as f64 - 0.5).max(MARGIN_LEFT);
            let x1 = x_of(e as f64 - 0.5).min(MARGIN_LEFT + plot_w);
            let _ = writeln!(
                svg,
                r##"<rect class="anomaly-span" x="{}" y="{}" width="{}" height="{}" fill="#f4a582" fill-opacity="0.35"/>"##,
                fmt(x0),
                fmt(MARGIN_TOP),
                fmt((x1 - x0).max(1.0)),
                fmt(bottom - MARGIN_TOP)
            );
        }
    }

    for (i, panel) in panels.iter().enumerate() {
        let top = MARGIN_TOP + i as f64 * (PANEL_HEIGHT + GAP);
        let finite = panel.lines.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else if lo.is_finite() { (lo - 1.0, lo + 1.0) } else { (0.0, 1.0) };
        let y_of = |v: f64| top + PANEL_HEIGHT - (v - lo) / (hi - lo) * PANEL_HEIGHT;

        let _ = writeln!(svg, r##"<g class="panel">"##);
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{PANEL_HEIGHT}" fill="none" stroke="#888"/>"##,
            fmt(MARGIN_LEFT),
            fmt(top),
            fmt(plot_w)
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"##,
            fmt(MARGIN_LEFT),
            fmt(top - 6.0),
            escape(&panel.title)
        );
        for (label, value) in [(hi, top + 10.0), (lo, top + PANEL_HEIGHT)] {
            let _ = writeln!(
                svg,
                r##"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"##,
                fmt(MARGIN_LEFT - 4.0),
                fmt(value),
                escape(&format!("{label:.3}"))
            );
        }
        for (k, line) in panel.lines.iter().enumerate() {
            // Non-finite values break the line into separate segments.
            let mut segment = Vec::new();
            let color = COLORS[k % COLORS.len()];
            let flush = |segment: &mut Vec<String>, svg: &mut String| {
                if !segment.is_empty() {
                    let _ = writeln!(
                        svg,
                        r##"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"##,
                        segment.join(" ")
                    );
                    segment.clear();
                }
            };
            for (t, v) in line.iter().enumerate() {
                if v.is_finite() {
                    segment.push(format!("{},{}", fmt(x_of(t as f64)), fmt(y_of(*v))));
                } else {
                    flush(&mut segment, &mut svg);
                }
            }
            flush(&mut segment, &mut svg);
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}
