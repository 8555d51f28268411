//! JSON run configuration: schema, validation, and construction of the
//! core objects a run needs.

use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Deserialize;

use adiaphase_core::evolution::StateVector;
use adiaphase_core::fieldpath::{FieldPath, PrecessingFieldParams, TimeGrid};
use adiaphase_core::hamiltonian::{HamiltonianFamily, HermitianOperator, SpinModelParams};
use adiaphase_core::observables::ObservableOp;
use adiaphase_core::phases::GaugeFunction;

use crate::CliError;

/// Amplitude-list norm deviation up to which the state is renormalized
/// (with a warning); larger deviations are configuration errors.
pub const AMPLITUDE_RENORM_LIMIT: f64 = 1e-6;

/// Default ceiling on cross-basis expectation discrepancies.
pub const DEFAULT_GAUGE_DISCREPANCY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub path: PathSpec,
    pub grid: GridSpec,
    pub initial_state: InitialStateSpec,
    #[serde(default)]
    pub gauge: Option<GaugeSpec>,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "model")]
pub enum ModelSpec {
    #[serde(rename = "spin_half")]
    SpinHalf { mu: f64 },
    /// H(R) = Σ_l X_l M_l; one constant Hermitian matrix per field
    /// component, entries as [re, im] pairs.
    #[serde(rename = "matrix")]
    Matrix { terms: Vec<ComplexMatrixSpec> },
}

pub type ComplexMatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type")]
pub enum PathSpec {
    #[serde(rename = "precessing")]
    Precessing {
        #[serde(rename = "B")]
        b: f64,
        theta: f64,
        omega: f64,
    },
    #[serde(rename = "piecewise")]
    Piecewise { knots: Vec<(f64, Vec<f64>)> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialStateSpec {
    /// 1-based level label: the instantaneous eigenstate |φ_level; 0⟩.
    Level { level: usize },
    /// Amplitudes in the computational basis, [re, im] per component.
    Amplitudes { amplitudes: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type")]
pub enum GaugeSpec {
    #[serde(rename = "constant")]
    Constant { values: Vec<f64> },
    #[serde(rename = "linear")]
    Linear { rates: Vec<f64> },
    #[serde(rename = "sinusoidal")]
    Sinusoidal {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        #[serde(default)]
        phases: Option<Vec<f64>>,
    },
    #[serde(rename = "samples")]
    Samples { values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    /// "sigma_x" | "sigma_y" | "sigma_z" | "identity".
    Named(String),
    Custom { name: String, matrix: ComplexMatrixSpec },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// "omega" (precessing paths) or "N".
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default = "default_gauge_discrepancy")]
    pub gauge_discrepancy: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            gauge_discrepancy: DEFAULT_GAUGE_DISCREPANCY_TOL,
        }
    }
}

fn default_gauge_discrepancy() -> f64 {
    DEFAULT_GAUGE_DISCREPANCY_TOL
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.grid.steps < 2 {
            return Err(CliError::Config(format!(
                "grid.N must be at least 2, got {}",
                self.grid.steps
            )));
        }
        if !(self.grid.duration > 0.0) || !self.grid.duration.is_finite() {
            return Err(CliError::Config(format!(
                "grid.T must be positive and finite, got {}",
                self.grid.duration
            )));
        }
        if !(self.tolerances.gauge_discrepancy > 0.0) {
            return Err(CliError::Config(
                "tolerances.gauge_discrepancy must be positive".into(),
            ));
        }
        if let Some(sweep) = &self.sweep {
            match sweep.parameter.as_str() {
                "omega" | "N" => {}
                other => {
                    return Err(CliError::Config(format!(
                        "unknown sweep parameter {other:?} (expected \"omega\" or \"N\")"
                    )));
                }
            }
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.grid.duration, self.grid.steps)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Precessing parameters when the path is precessing.
    pub fn precessing_params(&self) -> Option<Result<PrecessingFieldParams, CliError>> {
        match &self.path {
            PathSpec::Precessing { b, theta, omega } => Some(
                PrecessingFieldParams::new(*b, *theta, *omega)
                    .map_err(|e| CliError::Config(e.to_string())),
            ),
            PathSpec::Piecewise { .. } => None,
        }
    }

    pub fn build_path(&self) -> Result<FieldPath, CliError> {
        let path = match &self.path {
            PathSpec::Precessing { b, theta, omega } => {
                let params = PrecessingFieldParams::new(*b, *theta, *omega)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                FieldPath::precessing(params, self.grid.duration)
            }
            PathSpec::Piecewise { knots } => FieldPath::piecewise_linear(knots.clone()),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        if self.grid.duration > path.duration() {
            return Err(CliError::Config(format!(
                "grid.T = {} exceeds the path duration {}",
                self.grid.duration,
                path.duration()
            )));
        }
        Ok(path)
    }

    pub fn build_family(&self, path: FieldPath) -> Result<HamiltonianFamily, CliError> {
        match &self.model {
            ModelSpec::SpinHalf { mu } => {
                let params =
                    SpinModelParams::new(*mu).map_err(|e| CliError::Config(e.to_string()))?;
                HamiltonianFamily::spin_half(params, path)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
            ModelSpec::Matrix { terms } => {
                let terms = terms
                    .iter()
                    .enumerate()
                    .map(|(i, spec)| {
                        parse_hermitian(spec)
                            .map_err(|e| CliError::Config(format!("model.terms[{i}]: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                HamiltonianFamily::from_terms(path, terms)
                    .map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    /// Initial state in the computational basis; level labels resolve
    /// against the frame-0 eigenbasis.
    pub fn build_initial_state(
        &self,
        frame0: &adiaphase_core::spectral::SpectralFrame,
    ) -> Result<StateVector, CliError> {
        match &self.initial_state {
            InitialStateSpec::Level { level } => {
                if *level == 0 || *level > frame0.dimension() {
                    return Err(CliError::Config(format!(
                        "initial_state.level must be in 1..={}, got {level}",
                        frame0.dimension()
                    )));
                }
                StateVector::new(frame0.eigenvector(level - 1).clone_owned())
                    .map_err(|e| CliError::Config(e.to_string()))
            }
            InitialStateSpec::Amplitudes { amplitudes } => {
                if amplitudes.len() != frame0.dimension() {
                    return Err(CliError::Config(format!(
                        "initial_state.amplitudes has {} components, model has dimension {}",
                        amplitudes.len(),
                        frame0.dimension()
                    )));
                }
                let raw = nalgebra::DVector::from_iterator(
                    amplitudes.len(),
                    amplitudes.iter().map(|[re, im]| C64::new(*re, *im)),
                );
                let deviation = (raw.norm() - 1.0).abs();
                if deviation > AMPLITUDE_RENORM_LIMIT {
                    return Err(CliError::Config(format!(
                        "initial_state.amplitudes norm deviates from 1 by {deviation:.3e} (limit {AMPLITUDE_RENORM_LIMIT:.0e})"
                    )));
                }
                if deviation > 1e-12 {
                    eprintln!(
                        "warning: renormalizing initial amplitudes (norm off by {deviation:.3e})"
                    );
                }
                StateVector::normalized(raw).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    /// Gauge sampled on the run grid, when one is configured.
    pub fn build_gauge(
        &self,
        levels: usize,
        grid: TimeGrid,
    ) -> Result<Option<GaugeFunction>, CliError> {
        let Some(spec) = &self.gauge else {
            return Ok(None);
        };
        let gauge = match spec {
            GaugeSpec::Constant { values } => {
                expect_levels(values.len(), levels, "gauge.values")?;
                GaugeFunction::constant(values, grid)
            }
            GaugeSpec::Linear { rates } => {
                expect_levels(rates.len(), levels, "gauge.rates")?;
                GaugeFunction::linear(rates, grid)
            }
            GaugeSpec::Sinusoidal {
                amplitudes,
                frequencies,
                phases,
            } => {
                expect_levels(amplitudes.len(), levels, "gauge.amplitudes")?;
                expect_levels(frequencies.len(), levels, "gauge.frequencies")?;
                let phases = phases.clone().unwrap_or_else(|| vec![0.0; levels]);
                expect_levels(phases.len(), levels, "gauge.phases")?;
                GaugeFunction::sinusoidal(amplitudes, frequencies, &phases, grid)
                    .map_err(|e| CliError::Config(e.to_string()))?
            }
            GaugeSpec::Samples { values } => {
                expect_levels(values.len(), levels, "gauge.values")?;
                for (level, row) in values.iter().enumerate() {
                    if row.len() != grid.num_samples() {
                        return Err(CliError::Config(format!(
                            "gauge.values[{level}] has {} samples, grid needs {}",
                            row.len(),
                            grid.num_samples()
                        )));
                    }
                }
                GaugeFunction::from_samples(values.clone())
                    .map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        Ok(Some(gauge))
    }

    /// Observables to evaluate; defaults to the three Pauli matrices for
    /// two-level models and the identity otherwise.
    pub fn build_observables(
        &self,
        dimension: usize,
    ) -> Result<Vec<(String, ObservableOp)>, CliError> {
        if self.observables.is_empty() {
            return Ok(if dimension == 2 {
                vec![
                    ("sigma_x".into(), ObservableOp::pauli_x()),
                    ("sigma_y".into(), ObservableOp::pauli_y()),
                    ("sigma_z".into(), ObservableOp::pauli_z()),
                ]
            } else {
                vec![("identity".into(), ObservableOp::identity(dimension))]
            });
        }
        self.observables
            .iter()
            .map(|spec| match spec {
                ObservableSpec::Named(name) => {
                    let op = match name.as_str() {
                        "sigma_x" => ObservableOp::pauli_x(),
                        "sigma_y" => ObservableOp::pauli_y(),
                        "sigma_z" => ObservableOp::pauli_z(),
                        "identity" => ObservableOp::identity(dimension),
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown observable {other:?}"
                            )));
                        }
                    };
                    if op.dimension() != dimension {
                        return Err(CliError::Config(format!(
                            "observable {name} has dimension {}, model has {dimension}",
                            op.dimension()
                        )));
                    }
                    Ok((name.clone(), op))
                }
                ObservableSpec::Custom { name, matrix } => {
                    let op = parse_hermitian(matrix)
                        .map_err(|e| CliError::Config(format!("observable {name}: {e}")))?;
                    if op.dimension() != dimension {
                        return Err(CliError::Config(format!(
                            "observable {name} has dimension {}, model has {dimension}",
                            op.dimension()
                        )));
                    }
                    Ok((
                        name.clone(),
                        ObservableOp::from_matrix(op.into_matrix())
                            .map_err(|e| CliError::Config(e.to_string()))?,
                    ))
                }
            })
            .collect()
    }
}

fn expect_levels(got: usize, expected: usize, what: &str) -> Result<(), CliError> {
    if got != expected {
        return Err(CliError::Config(format!(
            "{what} has {got} entries, model has {expected} levels"
        )));
    }
    Ok(())
}

fn parse_hermitian(spec: &ComplexMatrixSpec) -> Result<HermitianOperator, String> {
    let rows = spec.len();
    if rows == 0 {
        return Err("matrix must not be empty".into());
    }
    for (i, row) in spec.iter().enumerate() {
        if row.len() != rows {
            return Err(format!(
                "row {i} has {} entries, expected {rows} (square matrix of [re, im] pairs)",
                row.len()
            ));
        }
    }
    let matrix = DMatrix::from_fn(rows, rows, |i, j| {
        C64::new(spec[i][j][0], spec[i][j][1])
    });
    HermitianOperator::new(matrix).map_err(|e| e.to_string())
}
