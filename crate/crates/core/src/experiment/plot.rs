//! Static SVG line charts of sweep curves.

use std::fmt::Write as _;

use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x_label: String,
    /// `(x, mean, std)` for points with a value.
    pub points: Vec<(f64, f64, f64)>,
}

/// Read a curve CSV. Rows whose mean is empty (every cell failed) are skipped.
pub fn parse_curve(text: &str) -> Result<Curve> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() != 4 || names[1..] != ["mean_bacc", "std_bacc", "failures"] {
        return Err(Error::Format(format!("unexpected curve header {names:?}")));
    }
    let x_label = names[0].to_owned();
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or_default()
                .parse()
                .map_err(|_| Error::Format(format!("curve row {}: bad number {:?}", i + 1, rec.get(k))))
        };
        let x = num(0)?;
        if rec.get(1).unwrap_or_default().is_empty() {
            continue;
        }
        points.push((x, num(1)?, num(2)?));
    }
    if points.is_empty() {
        return Err(Error::Empty("curve has no points to plot".into()));
    }
    Ok(Curve { x_label, points })
}

fn log_scale(curve: &Curve) -> bool {
    curve.x_label == "beta" && curve.points.iter().all(|p| p.0 > 0.0)
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("{v:e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

/// Render the curve with markers, error bars of ± std, and labeled axes.
pub fn render_svg(curve: &Curve) -> String {
    let log = log_scale(curve);
    let tx = |x: f64| if log { x.log10() } else { x };
    let xs: Vec<f64> = curve.points.iter().map(|p| tx(p.0)).collect();
    let (mut x0, mut x1) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if x1 - x0 < 1e-12 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let (lo, hi) = curve
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1 - p.2), b.max(p.1 + p.2)));
    let (mut y0, mut y1) = ((lo / 5.0).floor() * 5.0, (hi / 5.0).ceil() * 5.0);
    if y1 - y0 < 5.0 {
        y0 -= 2.5;
        y1 += 2.5;
    }
    let pad = 0.05 * (x1 - x0);
    let (x0, x1) = (x0 - pad, x1 + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bx, by) = (LEFT, TOP + plot_h);
    let _ = writeln!(s, r#"<line class="axis" x1="{bx}" y1="{by}" x2="{:.2}" y2="{by}" stroke="black"/>"#, LEFT + plot_w);
    let _ = writeln!(s, r#"<line class="axis" x1="{bx}" y1="{TOP}" x2="{bx}" y2="{by}" stroke="black"/>"#);

    let steps = 5;
    for k in 0..=steps {
        let v = y0 + (y1 - y0) * k as f64 / steps as f64;
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{bx}" y2="{y:.2}" stroke="black"/>"##, bx - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, bx - 8.0, y + 4.0);
    }
    for (p, &x) in curve.points.iter().zip(&xs) {
        let x = px(x);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{by}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, by + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, by + 20.0, tick_label(p.0, log));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        curve.x_label,
        if log { " (log scale)" } else { "" }
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">balanced accuracy (%)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let path: Vec<String> = curve
        .points
        .iter()
        .zip(&xs)
        .map(|(p, &x)| format!("{:.2},{:.2}", px(x), py(p.1)))
        .collect();
    let _ = writeln!(s, r#"<polyline class="curve" points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.join(" "));
    for (p, &x) in curve.points.iter().zip(&xs) {
        let x = px(x);
        let (top, bot) = (py(p.1 + p.2), py(p.1 - p.2));
        let _ = writeln!(s, r#"<line class="errorbar" x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bot:.2}" stroke="steelblue"/>"#);
        for y in [top, bot] {
            let _ = writeln!(s, r#"<line class="errorbar" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="steelblue"/>"#, x - 4.0, x + 4.0);
        }
        let _ = writeln!(s, r#"<circle class="marker" cx="{x:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, py(p.1));
    }
    s.push_str("</svg>\n");
    s
}
