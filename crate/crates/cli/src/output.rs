//! CSV and JSON emission. CSVs are comma-separated, LF-terminated, UTF-8,
//! with a header row; floats carry 17 significant digits so a double round
//! trips exactly.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// 17 significant digits; `nan` for undefined cells.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<(), CliError> {
    let file = std::fs::File::create(path).map_err(CliError::Io)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", header.join(",")).map_err(CliError::Io)?;
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_float).collect();
        writeln!(out, "{}", cells.join(",")).map_err(CliError::Io)?;
    }
    out.flush().map_err(CliError::Io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
    std::fs::write(path, text + "\n").map_err(CliError::Io)
}

#[derive(Debug, Serialize)]
pub struct GridReport {
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

#[derive(Debug, Serialize)]
pub struct DeviationReport {
    pub max: f64,
    #[serde(rename = "final")]
    pub final_value: f64,
}

#[derive(Debug, Serialize)]
pub struct GaugeSection {
    pub max_discrepancy: f64,
    pub max_phase_shift_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Per-run summary written as report.json (stable key order: declaration
/// order below).
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub grid: GridReport,
    pub levels: usize,
    /// Raw pipeline phases at t = T, smooth gauge (level order ascending).
    pub final_geometric_phase: Vec<f64>,
    pub final_average_energy: Vec<f64>,
    pub final_dynamical_argument: Vec<f64>,
    /// Pipeline phases transported into the closed-form spin basis
    /// (precessing spin-1/2 runs only).
    pub final_transported_phase: Option<Vec<f64>>,
    pub final_closed_form_phase: Option<Vec<f64>>,
    pub transported_phase_error: Option<Vec<f64>>,
    pub adiabatic_deviation: DeviationReport,
    pub norm_drift: f64,
    pub min_spectral_gap: f64,
    pub gauge: Option<GaugeSection>,
    pub observables: Vec<String>,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyGaugeRow {
    pub index: usize,
    pub max_discrepancy: f64,
    pub max_phase_shift_residual: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub command: &'static str,
    pub tolerance: f64,
    pub random_gauges: Option<usize>,
    pub seed: Option<u64>,
    pub gauges: Vec<VerifyGaugeRow>,
    pub all_passed: bool,
    pub wall_time_seconds: f64,
}
