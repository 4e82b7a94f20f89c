use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::eval::slope_fit;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 56.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const DASHES: [&str; 6] = ["none", "8 4", "2 3", "10 3 2 3", "5 5", "1 6"];

#[derive(Debug, Deserialize)]
struct Row {
    x: f64,
    y: f64,
    series: String,
}

/// Series name → points, in first-appearance order of names.
pub type Series = Vec<(String, Vec<(f64, f64)>)>;

pub fn read_series(path: &Path) -> Result<Series> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut order: Vec<String> = Vec::new();
    let mut points: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: Row = row.map_err(|e| Error::format(path, e.to_string()))?;
        if !points.contains_key(&row.series) {
            order.push(row.series.clone());
        }
        points.entry(row.series).or_default().push((row.x, row.y));
    }
    if order.is_empty() {
        return Err(Error::format(path, "no data rows"));
    }
    Ok(order
        .into_iter()
        .map(|name| {
            let pts = points.remove(&name).unwrap_or_default();
            (name, pts)
        })
        .collect())
}

/// Writes rows `x,y,series`.
pub fn write_series(path: &Path, series: &Series) -> Result<()> {
    let mut out = String::from("x,y,series\n");
    for (name, points) in series {
        for (x, y) in points {
            writeln!(out, "{x},{y},{name}").expect("string write");
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Renders a CSV of `x,y,series` rows as a log-log SVG line plot.
pub fn render_plot(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let series = read_series(csv_path)?;
    let svg = render_svg(&series, &file_title(csv_path));
    std::fs::write(svg_path, svg).map_err(|e| Error::io(svg_path, e))
}

fn file_title(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().replace('_', " "))
        .unwrap_or_default()
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Deterministic SVG text for the given series. Nonpositive points cannot
/// be placed on log axes and are skipped.
pub fn render_svg(series: &Series, title: &str) -> String {
    let positive: Vec<(String, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, pts)| {
            let kept = pts
                .iter()
                .copied()
                .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
                .collect();
            (name.clone(), kept)
        })
        .collect();
    let all: Vec<(f64, f64)> = positive.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (0.0, 1.0, 0.0, 1.0);
    if !all.is_empty() {
        x_lo = all.iter().map(|p| p.0.log10()).fold(f64::INFINITY, f64::min);
        x_hi = all.iter().map(|p| p.0.log10()).fold(f64::NEG_INFINITY, f64::max);
        y_lo = all.iter().map(|p| p.1.log10()).fold(f64::INFINITY, f64::min);
        y_hi = all.iter().map(|p| p.1.log10()).fold(f64::NEG_INFINITY, f64::max);
    }
    let widen = |lo: f64, hi: f64| if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) };
    let (x_lo, x_hi) = widen(x_lo, x_hi);
    let (y_lo, y_hi) = widen(y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x.log10() - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| TOP + (y_hi - y.log10()) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{:.2}" y="18" text-anchor="middle">{}</text>"#, LEFT + plot_w / 2.0, escape(title)).unwrap();
    writeln!(
        svg,
        r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
    )
    .unwrap();

    for e in (x_lo.ceil() as i64)..=(x_hi.floor() as i64) {
        let x = px(10f64.powi(e as i32));
        writeln!(svg, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##, TOP, TOP + plot_h).unwrap();
        writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#, TOP + plot_h + 16.0).unwrap();
    }
    for e in (y_lo.ceil() as i64)..=(y_hi.floor() as i64) {
        let y = py(10f64.powi(e as i32));
        writeln!(svg, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + plot_w).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
    }
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">x (log scale)</text>"#, LEFT + plot_w / 2.0, HEIGHT - 12.0).unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">y (log scale)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    )
    .unwrap();

    for (i, (name, pts)) in positive.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[i % DASHES.len()];
        let mut sorted = pts.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.len() == 1 {
            let (x, y) = sorted[0];
            writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#, px(x), py(y)).unwrap();
        } else if sorted.len() > 1 {
            let coords: Vec<String> = sorted.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6" stroke-dasharray="{dash}"/>"#,
                coords.join(" ")
            )
            .unwrap();
        }
        let label = if sorted.len() >= 2 {
            let xs: Vec<f64> = sorted.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = sorted.iter().map(|p| p.1).collect();
            match slope_fit(&xs, &ys) {
                Ok(slope) => format!("{name} (slope {slope:.3})"),
                Err(_) => name.clone(),
            }
        } else {
            name.clone()
        };
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 14.0;
        writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.6" stroke-dasharray="{dash}"/>"#,
            lx + 26.0
        )
        .unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 32.0, ly + 4.0, escape(&label)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
