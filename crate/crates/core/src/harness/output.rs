//! Run artifacts: `iterations.csv`, `sync.csv`, `report.json` and two plots.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::twin::{RunReport, SyncPoint};
use crate::error::{Error, Result};
use crate::recovery::{IterationRecord, Status};

pub const ITERATIONS_HEADER: [&str; 15] = [
    "n",
    "t_n",
    "t_hat_n",
    "t_np1",
    "eta_n",
    "N_n",
    "N_tilde_n",
    "beta_n_sq",
    "beta_np1_sq",
    "abs_beta_sq_err",
    "delta_n",
    "zeta_n",
    "g_norm_combo",
    "conditions_passed",
    "status",
];

pub const SYNC_HEADER: [&str; 4] = ["t", "g_l2_sq", "beta_sq_grad_sq", "lyapunov"];

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn record_row(r: &IterationRecord) -> Vec<String> {
    vec![
        r.n.to_string(),
        float(r.t_n),
        float(r.t_hat_n),
        float(r.t_np1),
        float(r.eta_n),
        r.n_cut.to_string(),
        r.n_tilde.to_string(),
        float(r.beta_n_sq),
        float(r.beta_np1_sq),
        opt(r.abs_beta_sq_err),
        opt(r.delta_n),
        opt(r.zeta_n),
        opt(r.g_norm_combo),
        r.conditions
            .as_ref()
            .map(|c| c.passed_string())
            .unwrap_or_default(),
        r.status.to_string(),
    ]
}

pub fn write_iterations_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ITERATIONS_HEADER)?;
    for r in records {
        w.write_record(record_row(r))?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed line of `iterations.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub n: usize,
    pub t_n: f64,
    pub t_hat_n: f64,
    pub t_np1: f64,
    pub eta_n: f64,
    pub n_cut: u32,
    pub n_tilde: u32,
    pub beta_n_sq: f64,
    pub beta_np1_sq: f64,
    pub abs_beta_sq_err: Option<f64>,
    pub delta_n: Option<f64>,
    pub zeta_n: Option<f64>,
    pub g_norm_combo: Option<f64>,
    pub conditions_passed: String,
    pub status: Status,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let s = rec.get(i).unwrap_or("");
    s.trim().parse().map_err(|_| {
        Error::Config(format!(
            "iterations.csv line {line}: bad `{}` value {s:?}",
            ITERATIONS_HEADER[i]
        ))
    })
}

fn opt_field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<Option<f64>> {
    match rec.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => field(rec, i, line).map(Some),
    }
}

pub fn read_iterations_csv(path: &Path) -> Result<Vec<IterationRow>> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    parse_iterations_csv(&text)
}

pub fn parse_iterations_csv(text: &str) -> Result<Vec<IterationRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.iter().ne(ITERATIONS_HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "iterations.csv header {:?} does not match the expected columns",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        rows.push(IterationRow {
            n: field(&rec, 0, line)?,
            t_n: field(&rec, 1, line)?,
            t_hat_n: field(&rec, 2, line)?,
            t_np1: field(&rec, 3, line)?,
            eta_n: field(&rec, 4, line)?,
            n_cut: field(&rec, 5, line)?,
            n_tilde: field(&rec, 6, line)?,
            beta_n_sq: field(&rec, 7, line)?,
            beta_np1_sq: field(&rec, 8, line)?,
            abs_beta_sq_err: opt_field(&rec, 9, line)?,
            delta_n: opt_field(&rec, 10, line)?,
            zeta_n: opt_field(&rec, 11, line)?,
            g_norm_combo: opt_field(&rec, 12, line)?,
            conditions_passed: rec.get(13).unwrap_or("").to_string(),
            status: field(&rec, 14, line)?,
        });
    }
    Ok(rows)
}

pub fn write_sync_csv(path: &Path, points: &[SyncPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SYNC_HEADER)?;
    for p in points {
        w.write_record([
            float(p.t),
            float(p.g_sq),
            float(p.beta_sq * p.g_grad_sq),
            float(p.lyapunov()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// Paths written by [`write_run`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub iterations: PathBuf,
    pub sync: Option<PathBuf>,
    pub report: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn write_run(dir: &Path, report: &RunReport) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let iterations = dir.join("iterations.csv");
    write_iterations_csv(&iterations, &report.iterations)?;
    let sync = if report.sync.is_empty() {
        None
    } else {
        let p = dir.join("sync.csv");
        write_sync_csv(&p, &report.sync)?;
        Some(p)
    };
    let report_path = dir.join("report.json");
    write_json(&report_path, report)?;
    let plots = render_plots(dir)?;
    Ok(RunArtifacts {
        iterations,
        sync,
        report: report_path,
        plots,
    })
}

/// `(t, lyapunov)` pairs from `sync.csv`.
pub fn read_sync_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.iter().ne(SYNC_HEADER.iter().copied()) {
        return Err(Error::Config(format!(
            "{} has header {:?}, expected {SYNC_HEADER:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let get = |j: usize| -> Result<f64> {
            rec.get(j).unwrap_or("").trim().parse().map_err(|_| {
                Error::Config(format!(
                    "sync.csv line {}: bad `{}` value",
                    i + 2,
                    SYNC_HEADER[j]
                ))
            })
        };
        out.push((get(0)?, get(3)?));
    }
    Ok(out)
}

/// Redraws `plots/*.svg` from whichever of `iterations.csv` and `sync.csv`
/// exist in `dir`.
pub fn render_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let plots_dir = dir.join("plots");
    fs::create_dir_all(&plots_dir)?;
    let mut plots = Vec::new();
    let it = dir.join("iterations.csv");
    if it.exists() {
        // |beta_{n+1}^2 - alpha^2| is stored against the iteration that produced it
        let pts: Vec<(f64, f64)> = read_iterations_csv(&it)?
            .iter()
            .filter(|r| r.status == Status::Updated)
            .filter_map(|r| r.abs_beta_sq_err.map(|e| ((r.n + 1) as f64, e)))
            .collect();
        let p = plots_dir.join("beta_error.svg");
        fs::write(&p, log_plot("|beta_n^2 - alpha^2|", "n", &pts))?;
        plots.push(p);
    }
    let sy = dir.join("sync.csv");
    if sy.exists() {
        let pts = read_sync_csv(&sy)?;
        let p = plots_dir.join("sync.svg");
        fs::write(&p, log_plot("||g||^2 + beta^2 ||grad g||^2", "t", &pts))?;
        plots.push(p);
    }
    if plots.is_empty() {
        return Err(Error::Config(format!(
            "no iterations.csv or sync.csv in {}",
            dir.display()
        )));
    }
    Ok(plots)
}

/// Minimal log-scale line plot. Non-positive values are left out.
pub fn log_plot(title: &str, xlabel: &str, pts: &[(f64, f64)]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 56.0;
    let pts: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *y > 0.0)
        .map(|&(x, y)| (x, y.log10()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title),
        W / 2.0,
        H - 10.0,
        escape(xlabel)
    );
    if pts.is_empty() {
        svg.push_str(
            "<text x=\"320\" y=\"200\" text-anchor=\"middle\">no positive data</text>\n</svg>\n",
        );
        return svg;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    svg.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    ));
    let step = ((y1 - y0) / 8.0).ceil().max(1.0);
    let mut d = y0;
    while d <= y1 {
        svg.push_str(&format!(
            "<line x1=\"{PAD}\" x2=\"{}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\
             <text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">1e{}</text>\n",
            W - PAD,
            PAD - 4.0,
            sy(d) + 4.0,
            d as i64,
            y = sy(d),
        ));
        d += step;
    }
    for x in [x0, x1] {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            sx(x),
            H - PAD + 16.0,
            trim_num(x)
        ));
    }
    let path: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        path.join(" ")
    ));
    if pts.len() <= 64 {
        for &(x, y) in &pts {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n",
                sx(x),
                sy(y)
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn trim_num(x: f64) -> String {
    let s = format!("{x:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
