//! Standalone SVG scatter plots of results tables.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::anyhow;

use crate::results::Table;
use crate::{CliResult, Failure};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const PAD: f64 = 0.05;
const TICKS: usize = 5;

/// Axis range widened by 5% of the data extent on each side.
fn padded(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    // a flat axis still gets a visible range
    let pad = if span > 0.0 { PAD * span } else { PAD * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

/// Blue at 0, red at 1.
fn gradient(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(49.0, 215.0), lerp(54.0, 48.0), lerp(149.0, 39.0))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Glyph {
    x: f64,
    y: f64,
    color: Option<f64>,
    label: String,
}

pub fn render(table: &Table, x: &str, y: &str, color: &str) -> CliResult<(String, usize)> {
    let (xi, yi, ci) = (table.column(x)?, table.column(y)?, table.column(color)?);
    let label_cols: Vec<usize> = ["method", "dataset", "seed"].iter().filter_map(|c| table.column(c).ok()).collect();
    let mut glyphs = Vec::new();
    for (n, row) in table.rows.iter().enumerate() {
        let num = |i: usize| -> CliResult<f64> {
            row[i].parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Failure::usage(anyhow!("row {}: column '{}' is '{}', not a number", n + 1, table.header[i], row[i]))
            })
        };
        let color = if row[ci].is_empty() { None } else { Some(num(ci)?) };
        let label = label_cols.iter().map(|&i| row[i].as_str()).collect::<Vec<_>>().join(" ");
        glyphs.push(Glyph { x: num(xi)?, y: num(yi)?, color, label });
    }
    if glyphs.is_empty() {
        return Err(Failure::usage(anyhow!("no data rows to plot")));
    }

    let (x0, x1) = padded(glyphs.iter().map(|g| g.x));
    let (y0, y1) = padded(glyphs.iter().map(|g| g.y));
    let colored: Vec<f64> = glyphs.iter().filter_map(|g| g.color).collect();
    let (c0, c1) = colored.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let px = |v: f64| MARGIN + (v - x0) / (x1 - x0) * pw;
    let py = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=TICKS {
        let f = k as f64 / TICKS as f64;
        let (vx, vy) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (tx, ty) = (px(vx), py(vy));
        let base = HEIGHT - MARGIN;
        let _ = writeln!(s, r#"<line x1="{tx:.2}" y1="{base}" x2="{tx:.2}" y2="{:.2}" stroke="black"/>"#, base + 4.0);
        let _ = writeln!(s, r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{vx:.3}</text>"#, base + 16.0);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{ty:.2}" x2="{MARGIN}" y2="{ty:.2}" stroke="black"/>"#, MARGIN - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{vy:.3}</text>"#, MARGIN - 6.0, ty + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, HEIGHT - 20.0, escape(x));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y)
    );
    if !colored.is_empty() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}: <tspan fill="{}">{c0:.3}</tspan> to <tspan fill="{}">{c1:.3}</tspan></text>"#,
            WIDTH - MARGIN,
            MARGIN - 12.0,
            escape(color),
            gradient(0.0),
            gradient(1.0)
        );
    }
    for g in &glyphs {
        let fill = match g.color {
            Some(v) if c1 > c0 => gradient((v - c0) / (c1 - c0)),
            Some(_) => gradient(0.5),
            None => "#999999".to_string(),
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{fill}" stroke="black" stroke-width="0.5"><title>{}</title></circle>"#,
            px(g.x),
            py(g.y),
            escape(&g.label)
        );
    }
    s.push_str("</svg>\n");
    Ok((s, glyphs.len()))
}

pub fn plot(results: &Path, x: &str, y: &str, color: &str, out: &Path) -> CliResult {
    let table = Table::read(results)?;
    let (svg, n) = render(&table, x, y, color)?;
    std::fs::write(out, svg)?;
    println!("{n} points -> {}", out.display());
    Ok(())
}
