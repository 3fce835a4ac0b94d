//! CSV, JSON and SVG output of an ensemble run.

use std::fmt::Write as _;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{max_over_time, EnsembleConfig, EnsembleResult};
use crate::error::{Error, Result};

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const CURVES_PLOT: &str = "trace_distance.svg";
pub const SUMMARY_PLOT: &str = "max_vs_size.svg";

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config: &'a EnsembleConfig,
    config_hash: &'a str,
    code_version: &'a str,
    schema_version: u32,
    samples_completed: Vec<(usize, usize)>,
    failures: usize,
    max_trace_drift: f64,
    min_eigenvalue: f64,
}

/// Writes the report files into `out_dir` (created if needed) and returns
/// their paths.
pub fn emit_report(res: &EnsembleResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    if res.sizes.is_empty() {
        return Err(Error::InvalidParameter("ensemble result has no sizes".into()));
    }
    fs::create_dir_all(dir)?;

    let curves = dir.join(CURVES_FILE);
    let mut w = csv::Writer::from_path(&curves)?;
    w.write_record(["size", "t", "mean_td", "std_td"])?;
    for s in &res.sizes {
        for (i, t) in res.times.iter().enumerate() {
            w.write_record([
                s.size.to_string(),
                t.to_string(),
                s.mean[i].to_string(),
                s.std[i].to_string(),
            ])?;
        }
    }
    w.flush()?;

    let summary = dir.join(SUMMARY_FILE);
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["size", "max_mean_td", "std_at_max"])?;
    for s in &res.sizes {
        w.write_record([s.size.to_string(), s.max_mean.to_string(), s.std_at_max.to_string()])?;
    }
    w.flush()?;

    let echo = ConfigEcho {
        config: &res.config,
        config_hash: &res.config_hash,
        code_version: &res.code_version,
        schema_version: crate::CONFIG_SCHEMA_VERSION,
        samples_completed: res.sizes.iter().map(|s| (s.size, s.samples)).collect(),
        failures: res.sizes.iter().map(|s| s.failures).sum(),
        max_trace_drift: res.sizes.iter().map(|s| s.max_trace_drift).fold(0.0, f64::max),
        min_eigenvalue: res.sizes.iter().map(|s| s.min_eigenvalue).fold(f64::INFINITY, f64::min),
    };
    let config = dir.join(CONFIG_FILE);
    fs::write(&config, serde_json::to_string_pretty(&echo)? + "\n")?;

    let size_label = |n: usize| match res.config.family.kind {
        super::FamilyKind::Anderson3d => format!("L = {n}"),
        _ => format!("N = {n}"),
    };
    let series: Vec<Series> = res
        .sizes
        .iter()
        .map(|s| Series {
            label: size_label(s.size),
            x: res.times.clone(),
            y: s.mean.clone(),
            err: s.std.clone(),
            band: true,
        })
        .collect();
    let curves_svg = dir.join(CURVES_PLOT);
    fs::write(&curves_svg, line_plot(&series, "t", "trace distance"))?;

    let x_name = match res.config.family.kind {
        super::FamilyKind::Anderson3d => "L",
        _ => "N",
    };
    let max_series = [Series {
        label: "max over t of mean".into(),
        x: res.sizes.iter().map(|s| s.size as f64).collect(),
        y: res.sizes.iter().map(|s| s.max_mean).collect(),
        err: res.sizes.iter().map(|s| s.std_at_max).collect(),
        band: false,
    }];
    let summary_svg = dir.join(SUMMARY_PLOT);
    fs::write(&summary_svg, line_plot(&max_series, x_name, "max mean trace distance"))?;

    Ok(vec![curves, summary, config, curves_svg, summary_svg])
}

/// Recomputes `(size, max_mean_td, std_at_max)` from a written curves file.
pub fn summary_from_curves(path: impl AsRef<Path>) -> Result<Vec<(usize, f64, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("missing column {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(e.to_string()))
        };
        let size: usize = rec
            .get(0)
            .ok_or_else(|| Error::Parse("missing size".into()))?
            .parse()
            .map_err(|e: std::num::ParseIntError| Error::Parse(e.to_string()))?;
        let (m, s) = (parse(2)?, parse(3)?);
        match rows.last_mut() {
            Some(last) if last.0 == size => {
                last.1.push(m);
                last.2.push(s);
            }
            _ => rows.push((size, vec![m], vec![s])),
        }
    }
    Ok(rows
        .into_iter()
        .map(|(size, m, s)| {
            let (_, max, std) = max_over_time(&m, &s);
            (size, max, std)
        })
        .collect())
}

/// Parses a summary file.
pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<(usize, f64, f64)>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines().skip(1) {
        let line = line?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!("bad summary row: {line}")));
        }
        let f = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
        let size = cols[0].parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?;
        out.push((size, f(cols[1])?, f(cols[2])?));
    }
    Ok(out)
}

struct Series {
    label: String,
    x: Vec<f64>,
    y: Vec<f64>,
    err: Vec<f64>,
    /// Shaded band if true, error bars otherwise.
    band: bool,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn line_plot(series: &[Series], x_label: &str, y_label: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let fin = |v: &f64| v.is_finite();
    let xs = series.iter().flat_map(|s| s.x.iter()).copied().filter(fin);
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let ys = series
        .iter()
        .flat_map(|s| s.y.iter().zip(&s.err).map(|(y, e)| y + e.max(0.0)));
    let y1 = ys.filter(fin).fold(0.0_f64, f64::max);
    let (y0, mut y1) = (0.0, y1 * 1.05);
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > y0) {
        y1 = 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<g stroke="black" fill="none"><line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{l}" y1="{b}" x2="{l}" y2="{t}"/></g>"#,
        l = left,
        r = w - right,
        b = h - bottom,
        t = top
    );
    for tx in ticks(x0, x1) {
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{b2}" stroke="black"/><text x="{x:.2}" y="{ty}" text-anchor="middle">{tx}</text>"#,
            x = px(tx),
            b = h - bottom,
            b2 = h - bottom + 5.0,
            ty = h - bottom + 18.0,
            tx = fmt_tick(tx)
        );
    }
    for ty in ticks(y0, y1) {
        let _ = writeln!(
            s,
            r#"<line x1="{l2}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/><text x="{tx}" y="{yt:.2}" text-anchor="end">{v}</text>"#,
            l = left,
            l2 = left - 5.0,
            y = py(ty),
            tx = left - 8.0,
            yt = py(ty) + 4.0,
            v = fmt_tick(ty)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{x:.1}" y="{y}" text-anchor="middle">{lab}</text>"#,
        x = left + (w - left - right) / 2.0,
        y = h - 12.0,
        lab = escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16,{y:.1}) rotate(-90)" text-anchor="middle">{lab}</text>"#,
        y = top + (h - top - bottom) / 2.0,
        lab = escape(y_label)
    );

    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64, f64)> = ser
            .x
            .iter()
            .zip(&ser.y)
            .zip(&ser.err)
            .filter(|((x, y), e)| x.is_finite() && y.is_finite() && e.is_finite())
            .map(|((x, y), e)| (*x, *y, *e))
            .collect();
        if ser.band && !pts.is_empty() {
            let mut poly = String::new();
            for &(x, y, e) in &pts {
                let _ = write!(poly, "{:.2},{:.2} ", px(x), py(y + e));
            }
            for &(x, y, e) in pts.iter().rev() {
                let _ = write!(poly, "{:.2},{:.2} ", px(x), py((y - e).max(y0)));
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                poly.trim_end()
            );
        }
        let line: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        if !ser.band {
            for &(x, y, e) in &pts {
                let _ = writeln!(
                    s,
                    r#"<g stroke="{color}"><line x1="{x:.2}" y1="{a:.2}" x2="{x:.2}" y2="{b:.2}"/><line x1="{l:.2}" y1="{a:.2}" x2="{r:.2}" y2="{a:.2}"/><line x1="{l:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/></g><circle cx="{x:.2}" cy="{c:.2}" r="3" fill="{color}"/>"#,
                    x = px(x),
                    a = py(y + e),
                    b = py((y - e).max(y0)),
                    c = py(y),
                    l = px(x) - 4.0,
                    r = px(x) + 4.0
                );
            }
        }
        let ly = top + 10.0 + 18.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{a}" y1="{ly}" x2="{b}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{t}" y="{ty}">{lab}</text>"#,
            a = w - right + 10.0,
            b = w - right + 30.0,
            t = w - right + 36.0,
            ty = ly + 4.0,
            lab = escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let v = if v.abs() < 1e-12 { 0.0 } else { v };
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}
