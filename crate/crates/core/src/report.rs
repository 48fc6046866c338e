//! Result tables (tidy and wide CSV), JSON summaries and SVG plots for the
//! experiment engine.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiments::{ComparisonResult, MseGridResult, RateStudyResult};
use crate::{Error, Result};

/// One `(setting, n, σ², statistic, value)` observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub setting: String,
    pub n: usize,
    pub sigma2: f64,
    pub statistic: String,
    pub value: f64,
}

fn tidy(setting: &str, n: usize, sigma2: f64, stats: &[(&str, f64)]) -> Vec<TidyRow> {
    stats
        .iter()
        .map(|&(s, v)| TidyRow { setting: setting.to_string(), n, sigma2, statistic: s.to_string(), value: v })
        .collect()
}

pub fn rate_tidy(res: &RateStudyResult) -> Vec<TidyRow> {
    let s = res.setting.to_string();
    res.rows
        .iter()
        .flat_map(|r| {
            tidy(
                &s,
                r.n,
                res.sigma2,
                &[
                    ("w1_moment1", r.moments[0]),
                    ("w1_moment2", r.moments[1]),
                    ("w1_moment3", r.moments[2]),
                    ("w1_q99", r.q99),
                    ("median_sqrt_n_dist", r.median_scaled_dist),
                    ("reps_ok", r.reps_ok as f64),
                    ("failures", r.failures as f64),
                    ("nonconverged", r.nonconverged as f64),
                ],
            )
        })
        .collect()
}

pub fn comparison_tidy(res: &ComparisonResult) -> Vec<TidyRow> {
    let s = res.setting.to_string();
    res.rows
        .iter()
        .flat_map(|r| {
            tidy(
                &s,
                r.n,
                r.sigma2,
                &[
                    ("r_mean", r.r_mean),
                    ("r_mode", r.r_mode),
                    ("coverage_conditional", r.coverage_cond),
                    ("coverage_unconditional", r.coverage_uncond),
                    ("length_ratio", r.length_ratio),
                    ("mse_mean_conditional", r.mse_mean_cond),
                    ("mse_mode_conditional", r.mse_mode_cond),
                    ("mse_mean_unconditional", r.mse_mean_uncond),
                    ("mse_mode_unconditional", r.mse_mode_uncond),
                    ("reps_ok", r.reps_ok as f64),
                    ("failures", r.failures as f64),
                    ("skipped_points", r.skipped as f64),
                ],
            )
        })
        .collect()
}

pub fn mse_tidy(res: &MseGridResult) -> Vec<TidyRow> {
    let s = res.setting.to_string();
    res.rows
        .iter()
        .flat_map(|r| {
            tidy(
                &s,
                r.n,
                r.sigma2,
                &[
                    ("mse_mean", r.mse_mean),
                    ("mse_mode", r.mse_mode),
                    ("reps_ok", r.reps_ok as f64),
                    ("failures", r.failures as f64),
                ],
            )
        })
        .collect()
}

/// Plain CSV with a header row and floats in shortest round-trip form.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_path(path)?;
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { header, rows })
    }
}

pub fn tidy_table(rows: &[TidyRow]) -> Table {
    let mut t = Table::new(&["setting", "n", "sigma2", "statistic", "value"]);
    for r in rows {
        t.push(vec![r.setting.clone(), r.n.to_string(), r.sigma2.to_string(), r.statistic.clone(), r.value.to_string()]);
    }
    t
}

pub fn read_tidy(path: &Path) -> Result<Vec<TidyRow>> {
    let t = Table::read(path)?;
    let bad = |line: usize, msg: String| Error::Parse { path: path.display().to_string(), line: line as u64 + 2, msg };
    t.rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            if r.len() != 5 {
                return Err(bad(k, format!("expected 5 columns, found {}", r.len())));
            }
            Ok(TidyRow {
                setting: r[0].clone(),
                n: r[1].parse().map_err(|e| bad(k, format!("n: {e}")))?,
                sigma2: r[2].parse().map_err(|e| bad(k, format!("sigma2: {e}")))?,
                statistic: r[3].clone(),
                value: r[4].parse().map_err(|e| bad(k, format!("value: {e}")))?,
            })
        })
        .collect()
}

/// The four log-linear slopes, one row per setting.
pub fn slopes_table(res: &RateStudyResult) -> Table {
    let mut t = Table::new(&["setting", "sigma2", "w1_moment1", "w1_moment2", "w1_moment3", "w1_q99"]);
    let cells = match res.slopes {
        Some(s) => [s.m1, s.m2, s.m3, s.q99].map(|v| v.to_string()),
        None => std::array::from_fn(|_| "NaN".to_string()),
    };
    let mut row = vec![res.setting.to_string(), res.sigma2.to_string()];
    row.extend(cells);
    t.push(row);
    t
}

pub fn rate_records_table(res: &RateStudyResult) -> Table {
    let d = res.records.first().map_or(0, |r| r.beta_hat.len());
    let mut header = vec!["n".to_string(), "rep".into(), "w1".into(), "dist".into(), "converged".into()];
    header.extend((1..=d).map(|k| format!("beta{k}")));
    let mut t = Table { header, rows: Vec::new() };
    for r in &res.records {
        let mut row = vec![r.n.to_string(), r.rep.to_string(), r.w1.to_string(), r.dist.to_string(), r.converged.to_string()];
        row.extend(r.beta_hat.iter().map(f64::to_string));
        t.rows.push(row);
    }
    t
}

pub fn comparison_table(res: &ComparisonResult) -> Table {
    let mut t = Table::new(&[
        "setting",
        "n",
        "sigma2",
        "r_mean",
        "r_mode",
        "coverage_conditional",
        "coverage_unconditional",
        "length_ratio",
    ]);
    for r in &res.rows {
        t.push(vec![
            res.setting.to_string(),
            r.n.to_string(),
            r.sigma2.to_string(),
            r.r_mean.to_string(),
            r.r_mode.to_string(),
            r.coverage_cond.to_string(),
            r.coverage_uncond.to_string(),
            r.length_ratio.to_string(),
        ]);
    }
    t
}

pub fn mse_table(res: &MseGridResult) -> Table {
    let mut t = Table::new(&["setting", "n", "sigma2", "mse_mean", "mse_mode"]);
    for r in &res.rows {
        t.push(vec![
            res.setting.to_string(),
            r.n.to_string(),
            r.sigma2.to_string(),
            r.mse_mean.to_string(),
            r.mse_mode.to_string(),
        ]);
    }
    t
}

pub fn prediction_records_table(records: &[crate::experiments::PredictionRecord]) -> Table {
    let mut t = Table::new(&[
        "n",
        "sigma2",
        "rep",
        "mse_mean_cond",
        "mse_mode_cond",
        "mse_mean_uncond",
        "mse_mode_uncond",
        "coverage_cond",
        "coverage_uncond",
        "len_cond",
        "len_uncond",
        "skipped",
    ]);
    for r in records {
        t.push(vec![
            r.n.to_string(),
            r.sigma2.to_string(),
            r.rep.to_string(),
            r.mse_mean_cond.to_string(),
            r.mse_mode_cond.to_string(),
            r.mse_mean_uncond.to_string(),
            r.mse_mode_uncond.to_string(),
            r.coverage_cond.to_string(),
            r.coverage_uncond.to_string(),
            r.len_cond.to_string(),
            r.len_uncond.to_string(),
            r.skipped.to_string(),
        ]);
    }
    t
}

/// Log-log scatter of `points` with the least-squares line and its slope.
///
/// The output is a self-contained SVG document with fixed-precision
/// coordinates, so identical inputs give identical bytes.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], slope: Option<f64>) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 80.0;
    const R: f64 = 30.0;
    const T: f64 = 50.0;
    const B: f64 = 60.0;
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.log10(), y.log10())).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    if logs.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = logs.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    let pad = |lo: &mut f64, hi: &mut f64| {
        let span = (*hi - *lo).max(0.1);
        *lo -= 0.08 * span;
        *hi += 0.08 * span;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);
    let _ = writeln!(
        svg,
        r##"<rect x="{L}" y="{T}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - L - R,
        H - T - B
    );
    for (v, is_x) in log_ticks(x0, x1).into_iter().map(|v| (v, true)).chain(log_ticks(y0, y1).into_iter().map(|v| (v, false))) {
        let label = format_tick(10f64.powf(v));
        if is_x {
            let x = px(v);
            let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, H - B, H - B + 5.0);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, H - B + 18.0);
        } else {
            let y = py(v);
            let _ = writeln!(svg, r##"<line x1="{:.2}" y1="{y:.2}" x2="{L}" y2="{y:.2}" stroke="#444"/>"##, L - 5.0);
            let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, L - 8.0, y + 4.0);
        }
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, L + (W - L - R) / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        T + (H - T - B) / 2.0,
        T + (H - T - B) / 2.0,
        escape(y_label)
    );
    if let Some(b) = slope {
        let k = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
        let a = my - b * mx;
        let (xa, xb) = (logs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min), logs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max));
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-width="2"/>"##,
            px(xa),
            py(a + b * xa),
            px(xb),
            py(a + b * xb)
        );
        let _ = writeln!(svg, r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#c0392b">slope = {b:.3}</text>"##, W - R - 8.0, T + 18.0);
    }
    for &(x, y) in &logs {
        let _ = writeln!(svg, r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#2c3e50"/>"##, px(x), py(y));
    }
    svg.push_str("</svg>\n");
    svg
}

fn log_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let mut ticks = Vec::new();
    let mut e = lo.floor();
    while e <= hi.ceil() {
        for m in [1.0f64, 2.0, 5.0] {
            let v = e + m.log10();
            if v >= lo && v <= hi {
                ticks.push(v);
            }
        }
        e += 1.0;
    }
    ticks
}

fn format_tick(v: f64) -> String {
    if (1e-2..1e5).contains(&v) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
