use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::table::{mean_se, ResultRow, ResultsTable};
use crate::error::{Error, Result};

/// Numeric table columns usable as plot axis or series key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    P,
    N,
    D,
    Df,
    Tau,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::P => "p",
            Field::N => "n",
            Field::D => "d",
            Field::Df => "df",
            Field::Tau => "tau",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "p" => Field::P,
            "n" => Field::N,
            "d" => Field::D,
            "df" => Field::Df,
            "tau" => Field::Tau,
            other => return Err(Error::Config(format!("{other:?} is not a numeric table field"))),
        })
    }

    fn get(self, r: &ResultRow) -> f64 {
        match self {
            Field::P => r.p as f64,
            Field::N => r.n as f64,
            Field::D => r.d as f64,
            Field::Df => r.df,
            Field::Tau => r.tau,
        }
    }
}

/// `(x, mean, standard error)`.
type Point = (f64, f64, f64);

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn label(v: f64) -> String {
    // compact tick labels; the CSV carries full precision
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

/// Returns the SVG text and whether the plot is degenerate (one x value,
/// drawn as points only).
pub fn render_svg_lines(table: &ResultsTable, x_axis: Field, series: Field) -> Result<(String, bool)> {
    // series -> x -> finite errors
    let mut groups: BTreeMap<u64, BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    let mut series_order: Vec<f64> = Vec::new();
    for r in &table.rows {
        let s = series.get(r);
        if !series_order.iter().any(|&v| v.to_bits() == s.to_bits()) {
            series_order.push(s);
        }
        let xs = groups.entry(s.to_bits()).or_default();
        let e = xs.entry(x_axis.get(r).to_bits()).or_default();
        if let Some(err) = r.error {
            e.push(err);
        }
    }
    if groups.is_empty() {
        return Err(Error::Empty("nothing to plot".into()));
    }
    // (x, mean, se) sorted by x, per series
    let mut lines: Vec<(f64, Vec<Point>)> = Vec::new();
    for s in &series_order {
        let mut pts: Vec<(f64, f64, f64)> = groups[&s.to_bits()]
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(x, v)| {
                let (m, se) = mean_se(v);
                (f64::from_bits(*x), m, se)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        lines.push((*s, pts));
    }
    let all: Vec<&(f64, f64, f64)> = lines.iter().flat_map(|l| l.1.iter()).collect();
    if all.is_empty() {
        return Err(Error::Empty("every cell is missing; nothing to plot".into()));
    }
    let mut xs: Vec<f64> = all.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let degenerate = xs.len() == 1;
    if degenerate {
        log::warn!("only one {} value; plotting points without lines", x_axis.name());
    }

    let (mut x0, mut x1) = (xs[0], xs[xs.len() - 1]);
    if degenerate {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let y_lo = all.iter().map(|p| p.1 - p.2).fold(f64::INFINITY, f64::min).min(0.0);
    let mut y_hi = all.iter().map(|p| p.1 + p.2).fold(f64::NEG_INFINITY, f64::max);
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let y_hi = y_hi + 0.05 * (y_hi - y_lo);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    // axes
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{LEFT}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.3}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    s.push_str("<g class=\"xticks\">\n");
    for &x in &xs {
        let px = sx(x);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.3}" y1="{:.3}" x2="{px:.3}" y2="{:.3}" stroke="black"/><text x="{px:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            label(x)
        );
    }
    s.push_str("</g>\n<g class=\"yticks\">\n");
    for y in nice_ticks(y_lo, y_hi) {
        let py = sy(y);
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{py:.3}" x2="{LEFT}" y2="{py:.3}" stroke="black"/><text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            label(y)
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        x_axis.name()
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.3}" text-anchor="middle" transform="rotate(-90 15 {:.3})">mean estimation error</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (k, (sv, pts)) in lines.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(s, r#"<g class="series" data-{}="{}">"#, series.name(), label(*sv));
        if !degenerate && pts.len() > 1 {
            let coords: Vec<String> = pts.iter().map(|p| format!("{:.3},{:.3}", sx(p.0), sy(p.1))).collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                coords.join(" ")
            );
        }
        for &(x, m, se) in pts {
            let (px, lo, hi) = (sx(x), sy(m - se), sy(m + se));
            let _ = writeln!(
                s,
                r#"<path class="whisker" stroke="{color}" d="M{px:.3},{lo:.3}V{hi:.3}M{:.3},{lo:.3}H{:.3}M{:.3},{hi:.3}H{:.3}"/>"#,
                px - 4.0,
                px + 4.0,
                px - 4.0,
                px + 4.0
            );
            let _ = writeln!(s, r#"<circle cx="{px:.3}" cy="{:.3}" r="3" fill="{color}"/>"#, sy(m));
        }
        s.push_str("</g>\n");
    }

    s.push_str("<g class=\"legend\">\n");
    for (k, (sv, _)) in lines.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.3}" y1="{ly:.3}" x2="{:.3}" y2="{ly:.3}" stroke="{color}" stroke-width="2"/><text x="{:.3}" y="{:.3}">{}={}</text>"#,
            lx + 25.0,
            lx + 30.0,
            ly + 4.0,
            series.name(),
            label(*sv)
        );
    }
    s.push_str("</g>\n</svg>\n");
    Ok((s, degenerate))
}

pub fn emit_svg_lines(table: &ResultsTable, x_axis: Field, series: Field, path: impl AsRef<Path>) -> Result<bool> {
    let (svg, degenerate) = render_svg_lines(table, x_axis, series)?;
    let path = path.as_ref();
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))?;
    Ok(degenerate)
}
