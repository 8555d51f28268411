//! The three commands: simulate, verify, sweep.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use adiaphase_core::analytic_spin::{analytic_phases, transported_phases, SpinGauge};
use adiaphase_core::evolution::{
    adiabatic_deviation, adiabatic_state, decompose_initial, exact_propagate,
    InitialDecomposition, StateVector,
};
use adiaphase_core::fieldpath::{PrecessingFieldParams, TimeGrid};
use adiaphase_core::observables::{
    expectation_value, gauge_invariance_report, interference_sum,
};
use adiaphase_core::phases::{GaugeFunction, PhaseLedger};
use adiaphase_core::spectral::{spectral_trajectory, SpectralError, SpectralTrajectory};

use crate::config::{PathSpec, RunConfig, SweepSpec};
use crate::output::{
    fmt_float, write_csv, write_json, DeviationReport, GaugeSection, GridReport, RunReport,
    VerifyGaugeRow, VerifyReport,
};
use crate::CliError;

fn map_spectral(err: SpectralError) -> CliError {
    match err {
        SpectralError::NonDegenerateViolation { .. } => CliError::Physics(err.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

/// Everything one pipeline pass produces.
struct SimOutcome {
    grid: TimeGrid,
    traj: SpectralTrajectory,
    ledger: PhaseLedger,
    decomp: InitialDecomposition,
    exact: Vec<StateVector>,
    adiabatic: Vec<StateVector>,
    deviation: Vec<f64>,
    norm_drift: f64,
    min_gap: f64,
    precessing: Option<PrecessingFieldParams>,
    /// Pipeline phases in the closed-form basis, `[level][sample]`
    /// (precessing spin-1/2 only).
    transported: Option<Vec<Vec<f64>>>,
}

fn run_pipeline(config: &RunConfig) -> Result<SimOutcome, CliError> {
    let grid = config.time_grid()?;
    let path = config.build_path()?;
    let fam = config.build_family(path)?;
    let traj = spectral_trajectory(&fam, grid).map_err(map_spectral)?;
    let ledger = PhaseLedger::from_trajectory(&traj);
    let psi0 = config.build_initial_state(traj.frame(0))?;
    let decomp =
        decompose_initial(&psi0, traj.frame(0)).map_err(|e| CliError::Config(e.to_string()))?;
    let exact =
        exact_propagate(&fam, &psi0, grid).map_err(|e| CliError::Config(e.to_string()))?;
    let adiabatic: Vec<StateVector> = (0..grid.num_samples())
        .map(|k| adiabatic_state(&decomp, &traj, &ledger, k))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let deviation = adiabatic_deviation(&exact, &adiabatic)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let norm_drift = exact
        .iter()
        .map(|s| (s.norm() - 1.0).abs())
        .fold(0.0_f64, f64::max);
    let min_gap = traj
        .frames()
        .iter()
        .map(|f| f.min_gap())
        .fold(f64::INFINITY, f64::min);

    let is_spin = matches!(config.model, crate::config::ModelSpec::SpinHalf { .. });
    let precessing = match (is_spin, config.precessing_params()) {
        (true, Some(params)) => Some(params?),
        _ => None,
    };
    let transported = match &precessing {
        Some(params) => Some(
            transported_phases(&traj, params, &SpinGauge::zero())
                .map_err(|e| CliError::Config(e.to_string()))?,
        ),
        None => None,
    };

    Ok(SimOutcome {
        grid,
        traj,
        ledger,
        decomp,
        exact,
        adiabatic,
        deviation,
        norm_drift,
        min_gap,
        precessing,
        transported,
    })
}

fn evenly_spaced_samples(steps: usize, count: usize) -> Vec<usize> {
    if steps <= count {
        (1..=steps).collect()
    } else {
        (0..count).map(|i| (i + 1) * steps / count).collect()
    }
}

fn closed_form_finals(outcome: &SimOutcome) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    match (&outcome.precessing, &outcome.transported) {
        (Some(params), Some(transported)) => {
            let last = outcome.grid.steps();
            let duration = outcome.grid.duration();
            let (g1, g2) = analytic_phases(params, &SpinGauge::zero(), duration);
            let final_transported = vec![transported[0][last], transported[1][last]];
            let closed = vec![g1, g2];
            let error = vec![
                (final_transported[0] - g1).abs(),
                (final_transported[1] - g2).abs(),
            ];
            (Some(final_transported), Some(closed), Some(error))
        }
        _ => (None, None, None),
    }
}

pub fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let outcome = run_pipeline(config)?;
    let d = outcome.traj.dimension();
    let grid = outcome.grid;
    let last = grid.steps();

    let observables = config.build_observables(d)?;
    let gauge = config.build_gauge(d, grid)?;

    // phases.csv: raw phases, running averages, dynamical arguments and
    // instantaneous energies per level.
    let mut header = vec!["t".to_string()];
    for prefix in ["gamma", "avg_energy", "dyn_arg", "e"] {
        for level in 1..=d {
            header.push(format!("{prefix}_{level}"));
        }
    }
    write_csv(
        &out_dir.join("phases.csv"),
        &header,
        (0..=last).map(|k| {
            let mut row = vec![grid.time(k)];
            row.extend((0..d).map(|j| outcome.ledger.geometric(j, k)));
            row.extend((0..d).map(|j| outcome.ledger.average_energy(j, k)));
            row.extend((0..d).map(|j| outcome.ledger.dynamical_argument(j, k)));
            row.extend((0..d).map(|j| outcome.traj.frame(k).eigenvalue(j)));
            row
        }),
    )?;

    // states.csv: exact and adiabatic amplitudes plus their distance.
    let mut header = vec!["t".to_string()];
    for tag in ["exact", "adiab"] {
        for i in 1..=d {
            header.push(format!("{tag}_re_{i}"));
            header.push(format!("{tag}_im_{i}"));
        }
    }
    header.push("deviation".into());
    write_csv(
        &out_dir.join("states.csv"),
        &header,
        (0..=last).map(|k| {
            let mut row = vec![grid.time(k)];
            for state in [&outcome.exact[k], &outcome.adiabatic[k]] {
                for i in 0..d {
                    let a = state.amplitude(i);
                    row.push(a.re);
                    row.push(a.im);
                }
            }
            row.push(outcome.deviation[k]);
            row
        }),
    )?;

    // expectations.csv: both computation routes per observable, both bases
    // when a gauge is configured.
    let mut header = vec!["t".to_string()];
    for (name, _) in &observables {
        header.push(name.clone());
        header.push(format!("{name}_terms"));
        if gauge.is_some() {
            header.push(format!("{name}_gauged"));
            header.push(format!("{name}_terms_gauged"));
        }
    }
    header.push("max_discrepancy".into());

    let mut gauge_section: Option<GaugeSection> = None;
    let mut rows: Vec<Vec<f64>> = (0..=last).map(|k| vec![grid.time(k)]).collect();
    let mut row_discrepancy = vec![0.0_f64; last + 1];
    for (name, op) in &observables {
        match &gauge {
            Some(alpha) => {
                let samples: Vec<usize> = (0..=last).collect();
                let report = gauge_invariance_report(
                    &outcome.decomp,
                    &outcome.traj,
                    &outcome.ledger,
                    op,
                    alpha,
                    &samples,
                )
                .map_err(|e| CliError::Config(format!("observable {name}: {e}")))?;
                for (k, sample) in report.samples.iter().enumerate() {
                    rows[k].push(sample.direct_base);
                    rows[k].push(sample.terms_base);
                    rows[k].push(sample.direct_gauged);
                    rows[k].push(sample.terms_gauged);
                    row_discrepancy[k] = row_discrepancy[k].max(sample.discrepancy);
                }
                let section = gauge_section.get_or_insert(GaugeSection {
                    max_discrepancy: 0.0,
                    max_phase_shift_residual: 0.0,
                    tolerance: config.tolerances.gauge_discrepancy,
                    passed: true,
                });
                section.max_discrepancy = section.max_discrepancy.max(report.max_discrepancy);
                section.max_phase_shift_residual = section
                    .max_phase_shift_residual
                    .max(report.max_phase_shift_residual);
                section.passed =
                    section.max_discrepancy < config.tolerances.gauge_discrepancy;
            }
            None => {
                for k in 0..=last {
                    let direct = expectation_value(&outcome.adiabatic[k], op, grid.time(k))
                        .map_err(|e| CliError::Config(format!("observable {name}: {e}")))?;
                    let terms = interference_sum(
                        &outcome.decomp,
                        &outcome.ledger,
                        &outcome.traj,
                        op,
                        k,
                    )
                    .map_err(|e| CliError::Config(format!("observable {name}: {e}")))?;
                    rows[k].push(direct);
                    rows[k].push(terms);
                    row_discrepancy[k] = row_discrepancy[k].max((terms - direct).abs());
                }
            }
        }
    }
    for (k, row) in rows.iter_mut().enumerate() {
        row.push(row_discrepancy[k]);
    }
    write_csv(&out_dir.join("expectations.csv"), &header, rows.into_iter())?;

    let (final_transported, final_closed, transported_error) = closed_form_finals(&outcome);
    let report = RunReport {
        command: "simulate",
        grid: GridReport {
            duration: grid.duration(),
            steps: grid.steps(),
        },
        levels: d,
        final_geometric_phase: (0..d).map(|j| outcome.ledger.geometric(j, last)).collect(),
        final_average_energy: (0..d)
            .map(|j| outcome.ledger.average_energy(j, last))
            .collect(),
        final_dynamical_argument: (0..d)
            .map(|j| outcome.ledger.dynamical_argument(j, last))
            .collect(),
        final_transported_phase: final_transported,
        final_closed_form_phase: final_closed,
        transported_phase_error: transported_error,
        adiabatic_deviation: DeviationReport {
            max: outcome.deviation.iter().copied().fold(0.0, f64::max),
            final_value: outcome.deviation[last],
        },
        norm_drift: outcome.norm_drift,
        min_spectral_gap: outcome.min_gap,
        gauge: gauge_section,
        observables: observables.iter().map(|(name, _)| name.clone()).collect(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("report.json"), &report)?;
    println!(
        "simulate: {} samples, max deviation {}, report in {}",
        grid.num_samples(),
        fmt_float(report.adiabatic_deviation.max),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_verify(
    config: &RunConfig,
    out_dir: &Path,
    random_gauges: Option<usize>,
    seed: Option<u64>,
    tolerance_override: Option<f64>,
) -> Result<(), CliError> {
    let start = Instant::now();
    let tolerance = tolerance_override.unwrap_or(config.tolerances.gauge_discrepancy);
    if !(tolerance > 0.0) {
        return Err(CliError::Config("tolerance must be positive".into()));
    }
    let outcome = run_pipeline(config)?;
    let d = outcome.traj.dimension();
    let grid = outcome.grid;
    let observables = config.build_observables(d)?;
    let samples = evenly_spaced_samples(grid.steps(), 50);

    let gauges: Vec<GaugeFunction> = match random_gauges {
        Some(count) => {
            if count == 0 {
                return Err(CliError::Config("--random-gauges must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            (0..count)
                .map(|_| GaugeFunction::random_fourier(d, grid, 5, 1.0, &mut rng))
                .collect()
        }
        None => match config.build_gauge(d, grid)? {
            Some(gauge) => vec![gauge],
            None => {
                return Err(CliError::Config(
                    "verify needs a gauge spec in the config or --random-gauges K".into(),
                ));
            }
        },
    };

    let mut rows = Vec::with_capacity(gauges.len());
    let mut all_passed = true;
    for (index, gauge) in gauges.iter().enumerate() {
        let mut max_discrepancy: f64 = 0.0;
        let mut max_shift: f64 = 0.0;
        for (name, op) in &observables {
            let report = gauge_invariance_report(
                &outcome.decomp,
                &outcome.traj,
                &outcome.ledger,
                op,
                gauge,
                &samples,
            )
            .map_err(|e| CliError::Config(format!("observable {name}: {e}")))?;
            max_discrepancy = max_discrepancy.max(report.max_discrepancy);
            max_shift = max_shift.max(report.max_phase_shift_residual);
        }
        let passed = max_discrepancy < tolerance && max_shift < tolerance;
        all_passed &= passed;
        println!(
            "gauge {}/{}: max discrepancy {} (tolerance {})",
            index + 1,
            gauges.len(),
            fmt_float(max_discrepancy),
            fmt_float(tolerance)
        );
        rows.push(VerifyGaugeRow {
            index: index + 1,
            max_discrepancy,
            max_phase_shift_residual: max_shift,
            passed,
        });
    }

    let report = VerifyReport {
        command: "verify",
        tolerance,
        random_gauges,
        seed: random_gauges.map(|_| seed.unwrap_or(0)),
        gauges: rows,
        all_passed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join("report.json"), &report)?;
    if !all_passed {
        return Err(CliError::Tolerance(format!(
            "gauge discrepancy above tolerance {tolerance:e}"
        )));
    }
    Ok(())
}

/// One sweep point: parameter value plus summary numbers.
struct SweepRow {
    value: f64,
    max_deviation: f64,
    final_deviation: f64,
    phase_error_1: f64,
    phase_error_2: f64,
}

fn sweep_point(config: &RunConfig, sweep: &SweepSpec, value: f64) -> Result<SweepRow, CliError> {
    let mut point = config.clone();
    point.sweep = None;
    match sweep.parameter.as_str() {
        "omega" => {
            let PathSpec::Precessing { omega, .. } = &mut point.path else {
                return Err(CliError::Config(
                    "omega sweeps need a precessing path".into(),
                ));
            };
            if !(value > 0.0) {
                return Err(CliError::Config(format!(
                    "omega sweep value must be positive, got {value}"
                )));
            }
            // Hold the swept arc ωT and the step size h fixed: the path
            // geometry stays put while the drive slows down.
            let arc = *omega * config.grid.duration;
            let scale = arc / value / config.grid.duration;
            *omega = value;
            point.grid.duration = arc / value;
            point.grid.steps =
                ((config.grid.steps as f64) * scale).round().max(2.0) as usize;
        }
        "N" => {
            if value.fract() != 0.0 || value < 2.0 {
                return Err(CliError::Config(format!(
                    "N sweep values must be integers >= 2, got {value}"
                )));
            }
            point.grid.steps = value as usize;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep parameter {other:?}"
            )));
        }
    }
    let outcome = run_pipeline(&point)?;
    let last = outcome.grid.steps();
    let (_, _, error) = closed_form_finals(&outcome);
    let (phase_error_1, phase_error_2) = match error {
        Some(e) => (e[0], e[1]),
        None => (f64::NAN, f64::NAN),
    };
    Ok(SweepRow {
        value,
        max_deviation: outcome.deviation.iter().copied().fold(0.0, f64::max),
        final_deviation: outcome.deviation[last],
        phase_error_1,
        phase_error_2,
    })
}

pub fn cmd_sweep(config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep command needs a sweep spec".into()))?;

    let compute = || -> Result<Vec<SweepRow>, CliError> {
        sweep
            .values
            .par_iter()
            .map(|&value| sweep_point(config, sweep, value))
            .collect()
    };
    let rows = match config.workers {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?
            .install(compute),
        None => compute(),
    }?;

    let header: Vec<String> = [
        "parameter",
        "value",
        "max_deviation",
        "final_deviation",
        "phase_error_1",
        "phase_error_2",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let file = std::fs::File::create(out_dir.join("sweep.csv")).map_err(CliError::Io)?;
    let mut out = std::io::BufWriter::new(file);
    use std::io::Write;
    writeln!(out, "{}", header.join(",")).map_err(CliError::Io)?;
    for row in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sweep.parameter,
            fmt_float(row.value),
            fmt_float(row.max_deviation),
            fmt_float(row.final_deviation),
            fmt_float(row.phase_error_1),
            fmt_float(row.phase_error_2),
        )
        .map_err(CliError::Io)?;
    }
    out.flush().map_err(CliError::Io)?;
    println!(
        "sweep: {} points over {}, results in {}",
        rows.len(),
        sweep.parameter,
        out_dir.join("sweep.csv").display()
    );
    Ok(())
}

/// Output directory precedence: --out-dir flag, then ADIAPHASE_OUT, then
/// the config's output.dir, then the current directory.
pub fn resolve_out_dir(flag: Option<PathBuf>, config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| std::env::var_os("ADIAPHASE_OUT").map(PathBuf::from))
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(CliError::Io)?;
    Ok(dir)
}
