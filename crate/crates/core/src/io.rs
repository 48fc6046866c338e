//! CSV and JSON file formats.
//!
//! Numeric CSVs have an optional header row, detected by whether the first
//! row parses as numbers. Floats are written in Rust's shortest round-trip
//! form, so reading a file and writing it back reproduces the same bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conditional::ConditionalSummary;
use crate::data::{Covariates, Setting};
use crate::{Error, Result};

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

/// Numeric rows of a CSV file, skipping a non-numeric header row.
pub fn read_numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if k == 0 => continue,
            Err(e) => return Err(parse_err(path, line, format!("not a number ({e}): {:?}", rec.iter().collect::<Vec<_>>().join(",")))),
        };
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(path, line, format!("non-finite value {v}")));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(path, line, format!("expected {w} columns, found {}", row.len())));
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_covariates(path: &Path) -> Result<Covariates> {
    let rows = read_numeric_rows(path)?;
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no covariate rows"));
    }
    Covariates::from_rows(&rows)
}

/// A one-column numeric file (responses or `y₀` values).
pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    let rows = read_numeric_rows(path)?;
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no values"));
    }
    if rows[0].len() != 1 {
        return Err(parse_err(path, 1, format!("expected one column, found {}", rows[0].len())));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_covariates(path: &Path, x: &Covariates) -> Result<()> {
    let mut w = create(path)?;
    let header: Vec<String> = (1..=x.d()).map(|k| format!("x{k}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in x.rows() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_column(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Two-column `(z, f)` density export.
pub fn write_density(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "z,f")?;
    for (z, f) in points {
        writeln!(w, "{z},{f}")?;
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar describing how a synthetic dataset was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMeta {
    pub setting: Option<Setting>,
    pub n: usize,
    pub d: usize,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub beta0: Option<Vec<f64>>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Column label for the quantile at level `p`, e.g. `q025` for 0.025.
pub fn quantile_label(p: f64) -> String {
    let per_mille = (p * 1000.0).round() as u32;
    if (p * 1000.0 - per_mille as f64).abs() < 1e-9 {
        format!("q{per_mille:03}")
    } else {
        format!("q{p}")
    }
}

/// One row of batch conditional inference; `None` marks a response outside
/// the estimated support.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub y0: f64,
    pub summary: Option<ConditionalSummary>,
}

/// Batch CSV text: `y0,mean,mode,q_lo,q_hi,status`; flagged rows have empty
/// estimates.
pub fn format_batch(alpha: f64, rows: &[BatchRow]) -> String {
    let mut out = format!("y0,mean,mode,{},{},status\n", quantile_label(alpha / 2.0), quantile_label(1.0 - alpha / 2.0));
    for row in rows {
        match &row.summary {
            Some(s) => out += &format!("{},{},{},{},{},ok\n", row.y0, s.mean, s.mode, s.lo, s.hi),
            None => out += &format!("{},,,,,outside_support\n", row.y0),
        }
    }
    out
}

pub fn write_batch(path: &Path, alpha: f64, rows: &[BatchRow]) -> Result<()> {
    std::fs::write(path, format_batch(alpha, rows))?;
    Ok(())
}

pub fn read_batch(path: &Path) -> Result<(f64, Vec<BatchRow>)> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let headers = reader.headers()?.clone();
    let lo_label = headers.get(3).unwrap_or_default();
    let alpha = lo_label
        .strip_prefix('q')
        .and_then(|s| if s.contains('.') { s.parse::<f64>().ok() } else { s.parse::<f64>().ok().map(|v| v / 1000.0) })
        .map(|p| 2.0 * p)
        .ok_or_else(|| parse_err(path, 1, format!("unexpected header {:?}", headers.as_slice())))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or_default()
                .parse::<f64>()
                .map_err(|e| parse_err(path, line, format!("column {k}: {e}")))
        };
        let y0 = num(0)?;
        let summary = match rec.get(5) {
            Some("ok") => Some(ConditionalSummary { y0, mean: num(1)?, mode: num(2)?, lo: num(3)?, hi: num(4)? }),
            Some("outside_support") => None,
            other => return Err(parse_err(path, line, format!("unknown status {other:?}"))),
        };
        rows.push(BatchRow { y0, summary });
    }
    Ok((alpha, rows))
}
