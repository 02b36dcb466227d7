//! Static SVG plots.

use std::fmt::Write;

use crate::experiment::toy::{ToyRow, ToySettings};

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, svg: &mut String, title: &str, xlabel: &str, ylabel: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = writeln!(
            svg,
            r#"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
            l + w / 2.0,
            t - 8.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#,
            l + w / 2.0,
            t + h + 32.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 {} {})">{ylabel}</text>"#,
            l - 40.0,
            t + h / 2.0,
            l - 40.0,
            t + h / 2.0
        );
        for (v, is_x) in [
            (self.x.0, true),
            (self.x.1, true),
            (self.y.0, false),
            (self.y.1, false),
        ] {
            if is_x {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{v:.3}</text>"#,
                    self.px(v),
                    t + h + 14.0
                );
            } else {
                let _ = writeln!(
                    svg,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
                    l - 4.0,
                    self.py(v) + 3.0,
                    tick_label(v)
                );
            }
        }
    }
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e-2 && v.abs() < 1e3 {
        format!("{v:.3}")
    } else {
        format!("{v:.1e}")
    }
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Two panels of unit-length arrows showing the direction of the
/// Euclidean and the Wasserstein proximal update at every grid point.
pub fn vector_field_svg(rows: &[ToyRow], s: &ToySettings) -> String {
    let size = 360.0;
    let mut svg = header(2.0 * size + 180.0, size + 100.0);
    let cell = size / s.n as f64;
    for (panel, title) in ["Euclidean proximal", "Wasserstein proximal"]
        .iter()
        .enumerate()
    {
        let frame = Frame {
            left: 60.0 + panel as f64 * (size + 80.0),
            top: 40.0,
            width: size,
            height: size,
            x: s.a_range,
            y: s.b_range,
        };
        frame.axes(&mut svg, &format!("{title}, alpha = {}", s.alpha), "a", "b");
        for r in rows {
            let d = if panel == 0 { r.euclid } else { r.wass };
            let norm = d[0].hypot(d[1]);
            let (x0, y0) = (frame.px(r.a), frame.py(r.b));
            if norm < 1e-15 {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{x0:.1}" cy="{y0:.1}" r="1.5" fill="gray"/>"#
                );
                continue;
            }
            let len = 0.8 * cell;
            let (ux, uy) = (d[0] / norm, -d[1] / norm);
            let (x1, y1) = (x0 + len * ux, y0 + len * uy);
            let head = 0.3 * len;
            let (hx1, hy1) = (x1 - head * (ux - 0.5 * uy), y1 - head * (uy + 0.5 * ux));
            let (hx2, hy2) = (x1 - head * (ux + 0.5 * uy), y1 - head * (uy - 0.5 * ux));
            let _ = writeln!(
                svg,
                r#"<path d="M{x0:.1},{y0:.1} L{x1:.1},{y1:.1} M{hx1:.1},{hy1:.1} L{x1:.1},{y1:.1} L{hx2:.1},{hy2:.1}" stroke="{}" fill="none" stroke-width="1"/>"#,
                PALETTE[panel]
            );
        }
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="black"/>"#,
            frame.px(s.target.0),
            frame.py(s.target.1)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Runs of one method: per seed, `(wallclock_s, value)` at each evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSeries {
    pub label: String,
    pub runs: Vec<Vec<(f64, f64)>>,
}

/// Per evaluation index: mean wallclock, then min, mean and max value
/// over the runs that reached that index.
pub fn envelope(series: &EnvelopeSeries) -> Vec<(f64, f64, f64, f64)> {
    let len = series.runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .filter_map(|j| {
            let pts: Vec<(f64, f64)> = series
                .runs
                .iter()
                .filter_map(|r| r.get(j).copied())
                .collect();
            if pts.is_empty() {
                return None;
            }
            let c = pts.len() as f64;
            let t = pts.iter().map(|p| p.0).sum::<f64>() / c;
            let mean = pts.iter().map(|p| p.1).sum::<f64>() / c;
            let min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            Some((t, min, mean, max))
        })
        .collect()
}

/// Metric against wallclock on a log scale: a bold mean line and thin
/// min/max lines per method.
pub fn envelope_svg(series: &[EnvelopeSeries], metric_label: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let mut svg = header(w + 200.0, h + 100.0);
    let envs: Vec<_> = series.iter().map(envelope).collect();
    let floor = 1e-6;
    let all = envs.iter().flatten();
    let tmax = all.clone().map(|e| e.0).fold(0.0, f64::max).max(1e-3);
    let lo = all
        .clone()
        .map(|e| e.1.max(floor))
        .fold(f64::INFINITY, f64::min);
    let hi = all
        .map(|e| e.3.max(floor))
        .fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi.is_finite() && hi > lo {
        (lo.log10().floor(), hi.log10().ceil())
    } else {
        (-3.0, 1.0)
    };
    let frame = Frame {
        left: 70.0,
        top: 40.0,
        width: w,
        height: h,
        x: (0.0, tmax),
        y: (lo, hi),
    };
    frame.axes(
        &mut svg,
        &format!("{metric_label} vs wallclock"),
        "wallclock (s)",
        &format!("log10 {metric_label}"),
    );
    for (i, (s, env)) in series.iter().zip(&envs).enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for (pick, width) in [(1usize, 0.7), (2, 2.5), (3, 0.7)] {
            let points: Vec<String> = env
                .iter()
                .map(|e| {
                    let v = [e.1, e.2, e.3][pick - 1].max(floor).log10();
                    format!("{:.1},{:.1}", frame.px(e.0), frame.py(v))
                })
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="{width}"/>"#,
                points.join(" ")
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{colour}">{}</text>"#,
            frame.left + w + 15.0,
            frame.top + 20.0 + 18.0 * i as f64,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}
