//! CSV, JSON and plain-text renderings of benchmark results.
//!
//! CSV columns, in order:
//! `variant,L,precision,workers,iterations,warmups,seconds,gflops,gbytes_per_s,verified`.
//! Sweeps append a `speedup` column. Floats are written in shortest
//! round-trip form.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchResult, SweepRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "variant,L,precision,workers,iterations,warmups,seconds,gflops,gbytes_per_s,verified";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Text,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "text" => Ok(OutputFormat::Text),
            other => Err(Error::config(format!("unknown output format `{other}`"))),
        }
    }
}

fn csv_row(out: &mut String, r: &BenchResult) {
    let _ = write!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        r.variant,
        r.dim,
        r.precision,
        r.workers,
        r.iterations,
        r.warmups,
        r.seconds,
        r.gflops,
        r.gbytes_per_s,
        r.verified
    );
}

const TEXT_HEADER: &str = "VARIANT                  L  PREC  WORKERS     I    W     SECONDS      GFLOPS      GBYTES  VERIFIED";

fn text_row(out: &mut String, r: &BenchResult) {
    let _ = write!(
        out,
        "{:<22} {:>3}  {:<4}  {:>7} {:>5} {:>4} {:>11.6} {:>11.3} {:>11.3}  {}",
        r.variant,
        r.dim,
        r.precision.as_str(),
        r.workers,
        r.iterations,
        r.warmups,
        r.seconds,
        r.gflops,
        r.gbytes_per_s,
        if r.verified { "yes" } else { "NO" }
    );
}

/// Renders results; an empty list yields just the CSV header (or `[]`).
pub fn emit_report(results: &[BenchResult], format: OutputFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in results {
                csv_row(&mut out, r);
                out.push('\n');
            }
        }
        OutputFormat::Json => {
            out = serde_json::to_string_pretty(results).map_err(|e| Error::config(e.to_string()))?;
            out.push('\n');
        }
        OutputFormat::Text => {
            out.push_str(TEXT_HEADER);
            out.push('\n');
            for r in results {
                text_row(&mut out, r);
                out.push('\n');
            }
        }
    }
    Ok(out)
}

/// As [`emit_report`] with an extra speedup column.
pub fn emit_sweep(rows: &[SweepRow], format: OutputFormat) -> Result<String> {
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            let _ = writeln!(out, "{CSV_HEADER},speedup");
            for row in rows {
                csv_row(&mut out, &row.result);
                let _ = writeln!(out, ",{}", row.speedup);
            }
        }
        OutputFormat::Json => {
            out = serde_json::to_string_pretty(rows).map_err(|e| Error::config(e.to_string()))?;
            out.push('\n');
        }
        OutputFormat::Text => {
            let _ = writeln!(out, "{TEXT_HEADER}   SPEEDUP");
            for row in rows {
                text_row(&mut out, &row.result);
                let _ = writeln!(out, " {:>9.2}", row.speedup);
            }
        }
    }
    Ok(out)
}
