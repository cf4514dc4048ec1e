//! Stable result export. JSON carries the full structure; CSV has one row
//! per (arm, target, metric). Floats are written with 17 significant digits
//! in both formats, which is enough for exact f64 round-trips and makes the
//! byte output reproducible.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::experiment::AggregateResult;

/// The scalar metrics exported per (arm, target) cell, in CSV order.
pub const CSV_METRICS: [&str; 4] = [
    "coverage",
    "avg_ci_length",
    "standardized_mean",
    "standardized_var",
];

struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn fmt_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Serialize with fixed-precision floats; byte-stable for equal inputs.
pub fn to_json_string(aggregate: &AggregateResult) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    serde::Serialize::serialize(aggregate, &mut ser)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(out).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn from_json_str(s: &str) -> Result<AggregateResult> {
    serde_json::from_str(s).map_err(|e| Error::Serialize(e.to_string()))
}

/// CSV with header `arm,target,metric,value`: the four scalar metrics per
/// cell, then (when present) one `variance_error_n<t>` row per checkpoint.
pub fn to_csv_string(aggregate: &AggregateResult) -> String {
    let mut out = String::from("arm,target,metric,value\n");
    for cell in &aggregate.cells {
        let values = [
            cell.coverage,
            cell.avg_ci_length,
            cell.standardized_mean,
            cell.standardized_var,
        ];
        for (metric, value) in CSV_METRICS.iter().zip(values) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                cell.arm,
                cell.target,
                metric,
                fmt_float(value)
            ));
        }
    }
    if let Some(curve) = &aggregate.variance_error {
        for cell in &curve.cells {
            for (checkpoint, err) in curve.checkpoints.iter().zip(&cell.mean_abs_error) {
                out.push_str(&format!(
                    "{},{},variance_error_n{},{}\n",
                    cell.arm,
                    cell.target,
                    checkpoint,
                    fmt_float(*err)
                ));
            }
        }
    }
    out
}

/// Write the aggregate in the requested format ("json" or "csv").
pub fn export_results(aggregate: &AggregateResult, format: &str, path: &Path) -> Result<()> {
    let body = match format {
        "json" => to_json_string(aggregate)?,
        "csv" => to_csv_string(aggregate),
        other => {
            return Err(Error::Config(format!(
                "unknown export format {other:?}; expected \"csv\" or \"json\""
            )))
        }
    };
    let mut file = std::fs::File::create(path)?;
    file.write_all(body.as_bytes())?;
    Ok(())
}
