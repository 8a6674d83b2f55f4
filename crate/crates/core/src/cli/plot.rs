//! Static SVG plots. Output depends only on the inputs, so identical data
//! gives byte-identical files.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| {
            if hi - lo > 0.0 {
                let p = 0.05 * (hi - lo);
                (lo - p, hi + p)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x0, x1) = pad(x0, x1);
        let (y0, y1) = pad(y0, y1);
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    let (l, r, t, b) = (MARGIN_L, WIDTH - MARGIN_R, MARGIN_T, HEIGHT - MARGIN_B);
    writeln!(s, r#"<path d="M{l} {t}V{b}H{r}" fill="none" stroke="black"/>"#).unwrap();
    for k in 0..=4 {
        let fx = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
        let fy = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let (x, y) = (f.px(fx), f.py(fy));
        writeln!(s, r#"<path d="M{x:.2} {b}v5M{l} {y:.2}h-5" stroke="black"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            b + 18.0,
            tick(fx)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 8.0,
            y + 4.0,
            tick(fy)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (l + r) / 2.0,
        HEIGHT - 10.0,
        escape(xlabel)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    )
    .unwrap();
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(s: &mut String, labels: &[(&str, &str)]) {
    for (k, (label, color)) in labels.iter().enumerate() {
        let y = MARGIN_T + 12.0 + 16.0 * k as f64;
        let x = WIDTH - MARGIN_R - 150.0;
        writeln!(s, r#"<path d="M{x} {y}h20" stroke="{color}" stroke-width="2"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(label)).unwrap();
    }
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut s = open(title, xlabel, ylabel, &f);
    let mut labels = Vec::new();
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (i, (x, y)) in ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .enumerate()
        {
            write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, f.px(*x), f.py(*y)).unwrap();
        }
        writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#).unwrap();
        labels.push((ser.label.as_str(), color));
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// Histogram of `values` with vertical markers at labelled positions.
pub fn histogram(title: &str, xlabel: &str, values: &[f64], bins: usize, markers: &[(String, f64)]) -> String {
    let bins = bins.max(1);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let all = finite.iter().chain(markers.iter().map(|(_, v)| v));
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (lo.min(0.0), lo.max(0.0) + 1.0)
    };
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &finite {
        counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let f = Frame::fit([(lo, 0.0), (hi, top)].into_iter());
    let mut s = open(title, xlabel, "count", &f);
    for (k, c) in counts.iter().enumerate() {
        let x0 = f.px(lo + w * k as f64);
        let x1 = f.px(lo + w * (k + 1) as f64);
        let y = f.py(*c as f64);
        writeln!(
            s,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            x1 - x0,
            f.py(0.0) - y
        )
        .unwrap();
    }
    let mut labels = Vec::new();
    for (k, (label, v)) in markers.iter().enumerate() {
        let color = PALETTE[(k + 1) % PALETTE.len()];
        writeln!(
            s,
            r#"<path d="M{:.2} {MARGIN_T}V{}" stroke="{color}" stroke-width="2"/>"#,
            f.px(*v),
            HEIGHT - MARGIN_B
        )
        .unwrap();
        labels.push((label.as_str(), color));
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// Point cloud with labelled highlighted points.
pub fn scatter(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    cloud: &[(f64, f64)],
    marked: &[(String, (f64, f64))],
) -> String {
    let f = Frame::fit(cloud.iter().copied().chain(marked.iter().map(|(_, p)| *p)));
    let mut s = open(title, xlabel, ylabel, &f);
    for (x, y) in cloud {
        writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#1f77b4"/>"##,
            f.px(*x),
            f.py(*y)
        )
        .unwrap();
    }
    let mut labels = vec![("database", PALETTE[0])];
    for (k, (label, (x, y))) in marked.iter().enumerate() {
        let color = PALETTE[(k + 1) % PALETTE.len()];
        let (cx, cy) = (f.px(*x), f.py(*y));
        writeln!(
            s,
            r#"<path d="M{:.2} {:.2}l10 10m0 -10l-10 10" stroke="{color}" stroke-width="2"/>"#,
            cx - 5.0,
            cy - 5.0
        )
        .unwrap();
        labels.push((label.as_str(), color));
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}
