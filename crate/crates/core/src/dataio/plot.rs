//! SVG learning-curve plots of a risk surface along one source-group axis.
//!
//! The x axis is `log10(1 + n)` so that `n = 0` sits at the origin. Each
//! evaluation group (and each setting of the other groups' counts) gets a
//! mean polyline and, when every point has at least two trials, a shaded
//! band of two standard errors.

use crate::allocation::Allocation;
use crate::error::{Error, Result};
use crate::group::GroupId;
use crate::metrics::Metric;
use crate::sweep::RiskSurface;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64, Option<f64>)>,
}

fn collect_series(surface: &RiskSurface, axis: &GroupId) -> Result<Vec<Series>> {
    if !surface.source_groups().contains(axis) {
        return Err(Error::AxisNotFound(axis.clone()));
    }
    let mut lines: Vec<Allocation> = Vec::new();
    for a in surface.grid() {
        let key = a.without(axis);
        if !lines.contains(&key) {
            lines.push(key);
        }
    }
    let mut series = Vec::new();
    for g in surface.eval_groups() {
        for fixed in &lines {
            let mut points: Vec<(usize, f64, Option<f64>)> = surface
                .grid()
                .iter()
                .enumerate()
                .filter(|(_, a)| a.without(axis) == *fixed)
                .filter_map(|(i, a)| {
                    let cell = surface.cell(i, g)?;
                    Some((a.get(axis), cell.mean()?, cell.se()))
                })
                .collect();
            if points.is_empty() {
                continue;
            }
            points.sort_by_key(|p| p.0);
            points.dedup_by_key(|p| p.0);
            let label = if lines.len() > 1 {
                format!("{g} @ {fixed}")
            } else {
                g.to_string()
            };
            series.push(Series {
                label,
                points: points.into_iter().map(|(n, m, se)| (x_of(n), m, se)).collect(),
            });
        }
    }
    Ok(series)
}

fn x_of(n: usize) -> f64 {
    (1.0 + n as f64).log10()
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the plot. Output bytes depend only on the surface and axis.
pub fn emit_plot(surface: &RiskSurface, axis: &GroupId) -> Result<String> {
    let series = collect_series(surface, axis)?;
    let bands = !series.is_empty() && series.iter().all(|s| s.points.iter().all(|p| p.2.is_some()));

    let max_n = surface.grid().iter().map(|a| a.get(axis)).max().unwrap_or(0);
    let x_max = x_of(max_n).max(1.0);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &series {
        for &(_, m, se) in &s.points {
            let half = if bands { 2.0 * se.unwrap_or(0.0) } else { 0.0 };
            y_lo = y_lo.min(m - half);
            y_hi = y_hi.max(m + half);
        }
    }
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-12 * y_hi.abs().max(1.0) {
        let pad = 0.5 * y_hi.abs().max(1.0);
        (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x / x_max * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    // x ticks at 0 and powers of ten
    let mut tick = 0usize;
    loop {
        let x = px(x_of(tick));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{tick}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0
        );
        tick = if tick == 0 { 10 } else { tick * 10 };
        if x_of(tick) > x_max + 1e-9 {
            break;
        }
    }
    for k in 0..=4 {
        let y = y_lo + (y_hi - y_lo) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y:.4}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py(y) + 4.0,
            py = py(y)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{} training count (log scale, n+1)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        esc(axis.as_str())
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        match surface.meta.metric {
            Metric::Mse => "MSE",
            Metric::AurocComplement => "1 - AUROC",
        }
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if bands {
            let upper = s.points.iter().map(|&(x, m, se)| (x, m + 2.0 * se.unwrap_or(0.0)));
            let lower = s
                .points
                .iter()
                .rev()
                .map(|&(x, m, se)| (x, m - 2.0 * se.unwrap_or(0.0)));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            );
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, m, _)| format!("{:.2},{:.2}", px(x), py(m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            esc(&s.label)
        );
    }
    let note_y = TOP + 10.0 + 18.0 * series.len() as f64;
    let note = if bands {
        "shaded: mean ± 2 SE"
    } else {
        "no SE band (fewer than 2 trials)"
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{note_y:.2}" font-size="10">{note}</text>"#,
        WIDTH - RIGHT + 12.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_plot(surface: &RiskSurface, axis: &GroupId, out: &Path) -> Result<()> {
    std::fs::write(out, emit_plot(surface, axis)?)?;
    Ok(())
}
