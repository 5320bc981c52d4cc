//! Result persistence.
//!
//! Trial results serialize to CSV (fixed column order, header row) or
//! JSON (array of objects with the same field names). Numbers are
//! written with shortest round-trip precision, so identical inputs
//! always produce byte-identical files.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::TrialResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// One output row. Field order defines the CSV column order:
/// scenario_name, sweep_param, sweep_value, trial, machine, true_rpm,
/// fused_rpm, abs_error_rpm, pct_error, loc, loc_ratio, detection_failed,
/// wall_time_ms.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultRow {
    pub scenario_name: String,
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub trial: u32,
    pub machine: usize,
    pub true_rpm: f64,
    pub fused_rpm: f64,
    pub abs_error_rpm: f64,
    pub pct_error: f64,
    pub loc: usize,
    pub loc_ratio: f64,
    pub detection_failed: bool,
    pub wall_time_ms: f64,
}

impl From<&TrialResult> for ResultRow {
    fn from(r: &TrialResult) -> Self {
        ResultRow {
            scenario_name: r.scenario_name.clone(),
            sweep_param: r.sweep_param.map(|p| p.name().to_string()).unwrap_or_default(),
            sweep_value: r.sweep_value,
            trial: r.trial_index,
            machine: r.machine_index,
            true_rpm: r.true_rpm,
            fused_rpm: r.fused_rpm,
            abs_error_rpm: r.abs_error_rpm,
            pct_error: r.pct_error,
            loc: r.loc,
            loc_ratio: r.loc_ratio,
            detection_failed: r.detection_failed,
            wall_time_ms: r.wall_time_ms,
        }
    }
}

/// CSV column names, in emission order.
pub const CSV_COLUMNS: [&str; 13] = [
    "scenario_name",
    "sweep_param",
    "sweep_value",
    "trial",
    "machine",
    "true_rpm",
    "fused_rpm",
    "abs_error_rpm",
    "pct_error",
    "loc",
    "loc_ratio",
    "detection_failed",
    "wall_time_ms",
];

/// Render results into an in-memory buffer.
pub fn render_results(results: &[TrialResult], format: OutputFormat) -> Result<Vec<u8>> {
    let rows: Vec<ResultRow> = results.iter().map(ResultRow::from).collect();
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            if rows.is_empty() {
                // Header-only output for an empty result set.
                writer
                    .write_record(CSV_COLUMNS)
                    .map_err(|e| Error::Domain(e.to_string()))?;
            }
            for row in &rows {
                writer
                    .serialize(row)
                    .map_err(|e| Error::Domain(e.to_string()))?;
            }
            writer.into_inner().map_err(|e| Error::Domain(e.to_string()))
        }
        OutputFormat::Json => {
            let mut buf =
                serde_json::to_vec_pretty(&rows).map_err(|e| Error::Domain(e.to_string()))?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Write results to `destination` in the given format.
pub fn write_results(
    results: &[TrialResult],
    format: OutputFormat,
    destination: &Path,
) -> Result<()> {
    let bytes = render_results(results, format)?;
    let mut file = File::create(destination).map_err(|e| Error::Io {
        path: destination.to_path_buf(),
        source: e,
    })?;
    file.write_all(&bytes).map_err(|e| Error::Io {
        path: destination.to_path_buf(),
        source: e,
    })
}
