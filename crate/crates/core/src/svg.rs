//! Minimal self-contained SVG charts: line, scatter, bar and box plots.
//!
//! Output depends only on the data, so identical inputs give identical files.

use std::fmt::Write as _;

use crate::eval::BoxStats;

const W: f64 = 800.0;
const H: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }

    /// Points at x = 0, 1, 2, ...
    pub fn indexed(label: impl Into<String>, ys: &[f64]) -> Self {
        Series::new(
            label,
            ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect(),
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e6).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            f = Frame {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            };
        }
        if f.x1 == f.x0 {
            f.x0 -= 0.5;
            f.x1 += 0.5;
        }
        if f.y1 == f.y0 {
            f.y0 -= 0.5;
            f.y1 += 0.5;
        }
        let pad = 0.05 * (f.y1 - f.y0);
        f.y0 -= pad;
        f.y1 += pad;
        f
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str, x_ticks: bool) {
    let (bx, by) = (LEFT, H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<path d="M{bx},{TOP} V{by} H{}" fill="none" stroke="black"/>"#,
        W - RIGHT
    );
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let yv = f.y0 + t * (f.y1 - f.y0);
        let y = f.py(yv);
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{y:.2}" x2="{bx}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            bx - 4.0,
            bx - 6.0,
            y + 4.0,
            fmt_tick(yv)
        );
        if x_ticks {
            let xv = f.x0 + t * (f.x1 - f.x0);
            let x = f.px(xv);
            let _ = writeln!(
                out,
                r#"<line x1="{x:.2}" y1="{by}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                by + 4.0,
                by + 18.0,
                fmt_tick(xv)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let x = W - RIGHT - 160.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x}" y="{}" width="12" height="4" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            y - 4.0,
            PALETTE[i % PALETTE.len()],
            x + 18.0,
            y + 2.0,
            escape(l)
        );
    }
}

/// Polylines, one per series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label, true);
    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen_down { "L" } else { "M" },
                f.px(x),
                f.py(y)
            );
            pen_down = true;
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.2"/>"#,
            d.trim_end(),
            PALETTE[i % PALETTE.len()]
        );
    }
    legend(
        &mut out,
        &series.iter().map(|s| s.label.as_str()).collect::<Vec<_>>(),
    );
    out.push_str("</svg>\n");
    out
}

/// Points with an optional `y = x` reference line.
pub fn scatter_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64)],
    diagonal: bool,
) -> String {
    let f = Frame::fit(points.iter().copied());
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label, true);
    if diagonal {
        let lo = f.x0.max(f.y0);
        let hi = f.x1.min(f.y1);
        if hi > lo {
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
                f.px(lo),
                f.py(lo),
                f.px(hi),
                f.py(hi)
            );
        }
    }
    for &(x, y) in points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
    {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{}" fill-opacity="0.5"/>"#,
            f.px(x),
            f.py(y),
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Vertical bars, one per labelled value (histograms, Δt counts).
pub fn bar_chart(title: &str, x_label: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let ys = bars.iter().map(|b| b.1).chain([0.0]);
    let f = Frame::fit(ys.enumerate().map(|(i, y)| (i as f64, y)));
    let f = Frame {
        x0: 0.0,
        x1: bars.len().max(1) as f64,
        ..f
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, x_label, y_label, false);
    let step = (bars.len() / 12).max(1);
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = f.px(i as f64);
        let w = f.px(i as f64 + 1.0) - x;
        let (top, base) = (f.py(v.max(0.0)), f.py(v.min(0.0)));
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            x + 0.1 * w,
            0.8 * w,
            base - top,
            PALETTE[0]
        );
        if i % step == 0 {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                x + w / 2.0,
                H - BOTTOM + 18.0,
                escape(label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Tukey box plots, one per labelled group; empty groups leave a gap.
pub fn box_chart(title: &str, y_label: &str, groups: &[(String, Option<BoxStats>)]) -> String {
    let values = groups.iter().filter_map(|g| g.1.as_ref()).flat_map(|b| {
        [b.lower_whisker, b.upper_whisker]
            .into_iter()
            .chain(b.outliers.iter().copied())
    });
    let f = Frame::fit(values.map(|v| (0.0, v)));
    let f = Frame {
        x0: 0.0,
        x1: groups.len().max(1) as f64,
        ..f
    };
    let mut out = String::new();
    open(&mut out, title);
    axes(&mut out, &f, "", y_label, false);
    for (i, (label, stats)) in groups.iter().enumerate() {
        let x = f.px(i as f64);
        let w = f.px(i as f64 + 1.0) - x;
        let c = x + w / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{c:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - BOTTOM + 18.0,
            escape(label)
        );
        let Some(b) = stats else { continue };
        let (l, r) = (x + 0.2 * w, x + 0.8 * w);
        let _ = writeln!(
            out,
            r#"<line x1="{c:.2}" y1="{:.2}" x2="{c:.2}" y2="{:.2}" stroke="black"/>"#,
            f.py(b.lower_whisker),
            f.py(b.upper_whisker)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{l:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="black"/>"#,
            f.py(b.q3),
            r - l,
            f.py(b.q1) - f.py(b.q3),
            PALETTE[0]
        );
        let _ = writeln!(
            out,
            r#"<line x1="{l:.2}" y1="{:.2}" x2="{r:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            f.py(b.median),
            f.py(b.median)
        );
        for o in &b.outliers {
            let _ = writeln!(
                out,
                r#"<circle cx="{c:.2}" cy="{:.2}" r="1.5" fill="none" stroke="black"/>"#,
                f.py(*o)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
