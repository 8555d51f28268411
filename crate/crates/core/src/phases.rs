//! Geometric and dynamical phase accumulation, and gauge transformations of
//! the instantaneous basis.
//!
//! The geometric phase is discretized through link phases,
//!
//! ```text
//! γ_j(t_k) = -Σ_{l<k} Im log <v_j(t_l) | v_j(t_{l+1})>
//! ```
//!
//! with each link taken in (-π, π]. The sum is exactly gauge-covariant per
//! link as long as no link wraps the branch cut, which the smooth-gauge
//! continuation guarantees on adequately fine grids. Accumulated phases are
//! deliberately not reduced mod 2π; for the precessing spin model they grow
//! linearly in time.
//!
//! On a freshly continued trajectory every consecutive overlap is real and
//! positive, so γ_j vanishes identically there: the smooth gauge is a
//! discrete parallel transport. Nontrivial values appear for trajectories
//! rephased by [`apply_gauge`], and comparisons against closed forms go
//! through the gauge-transport relation (see the `analytic_spin` module).

use num_complex::Complex64 as C64;
use rand::Rng;
use thiserror::Error;

use crate::fieldpath::TimeGrid;
use crate::spectral::SpectralTrajectory;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("gauge sampled as {gauge_levels} levels x {gauge_samples} samples, trajectory needs {traj_levels} x {traj_samples}")]
    GridMismatch {
        gauge_levels: usize,
        gauge_samples: usize,
        traj_levels: usize,
        traj_samples: usize,
    },
    #[error("phase difference needs two distinct levels, got j = k = {0}")]
    EqualLevels(usize),
    #[error("level {level} out of range for {levels} levels")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("sample {sample} out of range for {samples} samples")]
    SampleOutOfRange { sample: usize, samples: usize },
    #[error("gauge samples must be finite (level {level}, sample {sample})")]
    NonFiniteGauge { level: usize, sample: usize },
    #[error("gauge rows have unequal lengths")]
    RaggedSamples,
    #[error("sinusoidal gauge needs matching parameter lists: {0} amplitudes, {1} frequencies, {2} phases")]
    ParameterMismatch(usize, usize, usize),
}

/// Per-level geometric phase series, `[level][sample]`, with γ_j(0) = 0.
pub fn geometric_phase(traj: &SpectralTrajectory) -> Vec<Vec<f64>> {
    let d = traj.dimension();
    let n = traj.num_samples();
    let mut series = vec![Vec::with_capacity(n); d];
    for level in 0..d {
        let mut gamma = 0.0;
        series[level].push(gamma);
        for pair in traj.frames().windows(2) {
            let overlap = pair[0]
                .eigenvector(level)
                .dotc(&pair[1].eigenvector(level));
            gamma -= overlap.arg();
            series[level].push(gamma);
        }
    }
    series
}

/// Running time average of E_j over [0, t_k] by the trapezoid rule;
/// at k = 0 this is the limit value E_j(0).
pub fn average_energy(
    traj: &SpectralTrajectory,
    level: usize,
    sample: usize,
) -> Result<f64, PhaseError> {
    let d = traj.dimension();
    if level >= d {
        return Err(PhaseError::LevelOutOfRange { level, levels: d });
    }
    if sample >= traj.num_samples() {
        return Err(PhaseError::SampleOutOfRange {
            sample,
            samples: traj.num_samples(),
        });
    }
    Ok(average_energy_series(traj)[level][sample])
}

/// All running averages at once, `[level][sample]`.
pub fn average_energy_series(traj: &SpectralTrajectory) -> Vec<Vec<f64>> {
    let d = traj.dimension();
    let h = traj.grid().step_size();
    let mut series = vec![Vec::with_capacity(traj.num_samples()); d];
    for level in 0..d {
        let mut integral = 0.0;
        series[level].push(traj.frame(0).eigenvalue(level));
        for (k, pair) in traj.frames().windows(2).enumerate() {
            integral += 0.5 * h * (pair[0].eigenvalue(level) + pair[1].eigenvalue(level));
            series[level].push(integral / traj.grid().time(k + 1));
        }
    }
    series
}

/// Geometric phases and running energy averages for every level and sample.
#[derive(Debug, Clone)]
pub struct PhaseLedger {
    grid: TimeGrid,
    geometric: Vec<Vec<f64>>,
    average_energy: Vec<Vec<f64>>,
}

impl PhaseLedger {
    pub fn from_trajectory(traj: &SpectralTrajectory) -> Self {
        Self {
            grid: traj.grid(),
            geometric: geometric_phase(traj),
            average_energy: average_energy_series(traj),
        }
    }

    /// Assembles a ledger from externally computed series (closed-form
    /// ingredients, for instance). Rows must share the grid's sample count.
    pub fn from_parts(
        grid: TimeGrid,
        geometric: Vec<Vec<f64>>,
        average_energy: Vec<Vec<f64>>,
    ) -> Result<Self, PhaseError> {
        let samples = grid.num_samples();
        if geometric.len() != average_energy.len() {
            return Err(PhaseError::RaggedSamples);
        }
        for row in geometric.iter().chain(average_energy.iter()) {
            if row.len() != samples {
                return Err(PhaseError::GridMismatch {
                    gauge_levels: geometric.len(),
                    gauge_samples: row.len(),
                    traj_levels: geometric.len(),
                    traj_samples: samples,
                });
            }
        }
        Ok(Self {
            grid,
            geometric,
            average_energy,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn levels(&self) -> usize {
        self.geometric.len()
    }

    pub fn num_samples(&self) -> usize {
        self.grid.num_samples()
    }

    pub fn geometric(&self, level: usize, sample: usize) -> f64 {
        self.geometric[level][sample]
    }

    pub fn geometric_series(&self, level: usize) -> &[f64] {
        &self.geometric[level]
    }

    pub fn average_energy(&self, level: usize, sample: usize) -> f64 {
        self.average_energy[level][sample]
    }

    /// Argument of the dynamical factor, -t_k ⟨E_j(t_k)⟩ (ħ = 1).
    pub fn dynamical_argument(&self, level: usize, sample: usize) -> f64 {
        -self.grid.time(sample) * self.average_energy[level][sample]
    }

    /// exp(-i t_k ⟨E_j(t_k)⟩); always unit modulus.
    pub fn dynamical_phase_factor(&self, level: usize, sample: usize) -> C64 {
        C64::from_polar(1.0, self.dynamical_argument(level, sample))
    }

    /// γ_j - γ_k at one sample. Basis-dependent for noncyclic evolution:
    /// under a gauge α it shifts by -(α_j(t)-α_j(0)) + (α_k(t)-α_k(0)).
    pub fn phase_difference(
        &self,
        level_j: usize,
        level_k: usize,
        sample: usize,
    ) -> Result<f64, PhaseError> {
        if level_j == level_k {
            return Err(PhaseError::EqualLevels(level_j));
        }
        for level in [level_j, level_k] {
            if level >= self.levels() {
                return Err(PhaseError::LevelOutOfRange {
                    level,
                    levels: self.levels(),
                });
            }
        }
        if sample >= self.num_samples() {
            return Err(PhaseError::SampleOutOfRange {
                sample,
                samples: self.num_samples(),
            });
        }
        Ok(self.geometric[level_j][sample] - self.geometric[level_k][sample])
    }
}

/// Per-level real rephasing functions α_n(t_k), sampled on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    values: Vec<Vec<f64>>,
}

impl GaugeFunction {
    /// `values[level][sample]`; rows must be equal-length and finite.
    pub fn from_samples(values: Vec<Vec<f64>>) -> Result<Self, PhaseError> {
        let samples = values.first().map(|row| row.len()).unwrap_or(0);
        for (level, row) in values.iter().enumerate() {
            if row.len() != samples {
                return Err(PhaseError::RaggedSamples);
            }
            if let Some(sample) = row.iter().position(|v| !v.is_finite()) {
                return Err(PhaseError::NonFiniteGauge { level, sample });
            }
        }
        Ok(Self { values })
    }

    pub fn zero(levels: usize, grid: TimeGrid) -> Self {
        Self {
            values: vec![vec![0.0; grid.num_samples()]; levels],
        }
    }

    /// α_n(t) = c_n.
    pub fn constant(levels: &[f64], grid: TimeGrid) -> Self {
        Self {
            values: levels
                .iter()
                .map(|c| vec![*c; grid.num_samples()])
                .collect(),
        }
    }

    /// α_n(t) = r_n · t.
    pub fn linear(rates: &[f64], grid: TimeGrid) -> Self {
        Self {
            values: rates
                .iter()
                .map(|r| grid.times().map(|t| r * t).collect())
                .collect(),
        }
    }

    /// α_n(t) = A_n sin(ν_n t + φ_n).
    pub fn sinusoidal(
        amplitudes: &[f64],
        frequencies: &[f64],
        phases: &[f64],
        grid: TimeGrid,
    ) -> Result<Self, PhaseError> {
        if amplitudes.len() != frequencies.len() || amplitudes.len() != phases.len() {
            return Err(PhaseError::ParameterMismatch(
                amplitudes.len(),
                frequencies.len(),
                phases.len(),
            ));
        }
        Ok(Self {
            values: amplitudes
                .iter()
                .zip(frequencies)
                .zip(phases)
                .map(|((a, nu), phi)| grid.times().map(|t| a * (nu * t + phi).sin()).collect())
                .collect(),
        })
    }

    /// Truncated Fourier series with period T and 1/m-damped random
    /// coefficients: smooth on the grid, single-valued over a full period,
    /// per-step increments small enough that link phases never wrap.
    pub fn random_fourier<R: Rng + ?Sized>(
        levels: usize,
        grid: TimeGrid,
        modes: usize,
        amplitude: f64,
        rng: &mut R,
    ) -> Self {
        let n = grid.steps() as f64;
        let values = (0..levels)
            .map(|_| {
                let coeffs: Vec<(f64, f64)> = (1..=modes)
                    .map(|m| {
                        let scale = amplitude / m as f64;
                        (
                            rng.random_range(-scale..=scale),
                            rng.random_range(-scale..=scale),
                        )
                    })
                    .collect();
                (0..grid.num_samples())
                    .map(|k| {
                        coeffs
                            .iter()
                            .enumerate()
                            .map(|(i, (a, b))| {
                                let angle =
                                    2.0 * std::f64::consts::PI * (i + 1) as f64 * k as f64 / n;
                                a * angle.cos() + b * angle.sin()
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self { values }
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn num_samples(&self) -> usize {
        self.values.first().map(|row| row.len()).unwrap_or(0)
    }

    pub fn value(&self, level: usize, sample: usize) -> f64 {
        self.values[level][sample]
    }

    pub fn series(&self, level: usize) -> &[f64] {
        &self.values[level]
    }
}

/// Rephases every eigenvector: |Φ_n; t_k⟩ = e^{iα_n(t_k)} |φ_n; t_k⟩.
/// Eigenvalues are untouched.
pub fn apply_gauge(
    traj: &SpectralTrajectory,
    gauge: &GaugeFunction,
) -> Result<SpectralTrajectory, PhaseError> {
    if gauge.levels() != traj.dimension() || gauge.num_samples() != traj.num_samples() {
        return Err(PhaseError::GridMismatch {
            gauge_levels: gauge.levels(),
            gauge_samples: gauge.num_samples(),
            traj_levels: traj.dimension(),
            traj_samples: traj.num_samples(),
        });
    }
    Ok(traj.map_frames(|k, frame| {
        let mut frame = frame.clone();
        for level in 0..gauge.levels() {
            let factor = C64::from_polar(1.0, gauge.value(level, k));
            SpectralTrajectory::rephase_level(&mut frame, level, factor);
        }
        frame
    }))
}

/// γ̃_j(t) = γ_j(t) - (α_j(t) - α_j(0)); the geometric phase in the
/// rephased basis. Exact arithmetic identity.
pub fn gauge_transformed_phase(gamma: f64, alpha_start: f64, alpha_end: f64) -> f64 {
    gamma - (alpha_end - alpha_start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldpath::{FieldPath, PrecessingFieldParams};
    use crate::hamiltonian::{HamiltonianFamily, SpinModelParams};
    use crate::spectral::spectral_trajectory;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn spin_trajectory(
        theta: f64,
        omega: f64,
        steps: usize,
        duration: f64,
    ) -> SpectralTrajectory {
        let params = PrecessingFieldParams::new(1.0, theta, omega).unwrap();
        let path = FieldPath::precessing(params, duration).unwrap();
        let fam =
            HamiltonianFamily::spin_half(SpinModelParams::new(1.0).unwrap(), path).unwrap();
        spectral_trajectory(&fam, TimeGrid::new(duration, steps).unwrap()).unwrap()
    }

    fn diagonal_family(f: impl Fn(f64) -> f64 + Send + Sync + Copy + 'static) -> HamiltonianFamily {
        let path = FieldPath::from_fn(1, 4.0, move |t| vec![f(t)]).unwrap();
        HamiltonianFamily::new(path, 2, |field| {
            let c = C64::new(field[0], 0.0);
            DMatrix::from_diagonal(&DVector::from_vec(vec![c, -c]))
        })
    }

    #[test]
    fn constant_hamiltonian_accumulates_no_phase() {
        let params = PrecessingFieldParams::new(1.0, 0.0, 0.0).unwrap();
        let path = FieldPath::precessing(params, 3.0).unwrap();
        let fam =
            HamiltonianFamily::spin_half(SpinModelParams::new(1.0).unwrap(), path).unwrap();
        let traj = spectral_trajectory(&fam, TimeGrid::new(3.0, 64).unwrap()).unwrap();
        for series in geometric_phase(&traj) {
            assert!(series.iter().all(|g| g.abs() < 1e-12));
        }
    }

    #[test]
    fn smooth_gauge_trajectory_has_zero_raw_phase() {
        // Parallel transport: the continuation makes every link real
        // positive, so the raw series vanishes and all geometric content
        // sits in the eigenvectors.
        let traj = spin_trajectory(PI / 3.0, 0.5, 512, 6.0);
        for series in geometric_phase(&traj) {
            assert!(series.iter().all(|g| g.abs() < 1e-12));
        }
    }

    #[test]
    fn average_energy_of_constant_spectrum() {
        let traj = spin_trajectory(PI / 2.0, 0.2, 128, 5.0);
        for k in [0, 50, 128] {
            assert_relative_eq!(average_energy(&traj, 0, k).unwrap(), -0.5, epsilon = 1e-12);
            assert_relative_eq!(average_energy(&traj, 1, k).unwrap(), 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn average_energy_of_linear_ramp() {
        // E_1(t) = 1 + c t with c = 0.5 over the offset ramp family:
        // the running average is 1 + c t / 2, and the trapezoid rule is
        // exact for linear integrands.
        let fam = diagonal_family(|t| 1.0 + 0.5 * t);
        let grid = TimeGrid::new(4.0, 32).unwrap();
        let traj = spectral_trajectory(&fam, grid).unwrap();
        for k in [1, 7, 32] {
            let t = grid.time(k);
            assert_relative_eq!(
                average_energy(&traj, 1, k).unwrap(),
                1.0 + 0.25 * t,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn average_energy_trapezoid_is_second_order() {
        let exact = |t: f64| (2.0 * t + 1.0 - t.cos()) / t;
        let errors: Vec<f64> = [64, 128]
            .iter()
            .map(|&steps| {
                let fam = diagonal_family(|t| 2.0 + t.sin());
                let grid = TimeGrid::new(4.0, steps).unwrap();
                let traj = spectral_trajectory(&fam, grid).unwrap();
                (average_energy(&traj, 1, steps).unwrap() - exact(4.0)).abs()
            })
            .collect();
        let ratio = errors[0] / errors[1];
        assert!(
            (3.5..=4.5).contains(&ratio),
            "trapezoid error ratio {ratio} outside [3.5, 4.5]"
        );
    }

    #[test]
    fn dynamical_phase_factor_basics() {
        let traj = spin_trajectory(PI / 4.0, 0.1, 64, 8.0);
        let ledger = PhaseLedger::from_trajectory(&traj);
        // Ground level of the spin model: <E_0> = -B/2, factor e^{+iBt/2}.
        let k = 40;
        let t = traj.grid().time(k);
        let factor = ledger.dynamical_phase_factor(0, k);
        let expected = C64::from_polar(1.0, 0.5 * t);
        assert!((factor - expected).norm() < 1e-12);
        assert_relative_eq!(factor.norm(), 1.0, epsilon = 1e-14);
        // Zero average energy gives exactly one.
        let zero = PhaseLedger::from_parts(
            traj.grid(),
            vec![vec![0.0; traj.num_samples()]; 2],
            vec![vec![0.0; traj.num_samples()]; 2],
        )
        .unwrap();
        assert_eq!(zero.dynamical_phase_factor(0, k), C64::new(1.0, 0.0));
    }

    #[test]
    fn zero_gauge_is_identity() {
        let traj = spin_trajectory(1.0, 0.4, 64, 3.0);
        let gauge = GaugeFunction::zero(2, traj.grid());
        let gauged = apply_gauge(&traj, &gauge).unwrap();
        for (a, b) in traj.frames().iter().zip(gauged.frames()) {
            assert_eq!(a.eigenvectors(), b.eigenvectors());
        }
    }

    #[test]
    fn constant_gauge_shifts_frame0_coefficients() {
        use crate::evolution::{decompose_initial, StateVector};
        let traj = spin_trajectory(1.2, 0.3, 32, 2.0);
        let c = 0.8;
        let gauge = GaugeFunction::constant(&[c, c], traj.grid());
        let gauged = apply_gauge(&traj, &gauge).unwrap();
        let psi0 = StateVector::new(DVector::from_vec(vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
        ]))
        .unwrap();
        let plain = decompose_initial(&psi0, traj.frame(0)).unwrap();
        let shifted = decompose_initial(&psi0, gauged.frame(0)).unwrap();
        let phase = C64::from_polar(1.0, -c);
        for (a, b) in plain.coefficients().iter().zip(shifted.coefficients()) {
            assert!((a * phase - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_shifts_geometric_phase_by_alpha_difference() {
        let traj = spin_trajectory(PI / 3.0, 0.5, 256, 5.0);
        let grid = traj.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gauge = GaugeFunction::random_fourier(2, grid, 4, 0.8, &mut rng);
        let base = geometric_phase(&traj);
        let gauged = geometric_phase(&apply_gauge(&traj, &gauge).unwrap());
        for level in 0..2 {
            for k in 0..traj.num_samples() {
                let expected = base[level][k]
                    - (gauge.value(level, k) - gauge.value(level, 0));
                assert!(
                    (gauged[level][k] - expected).abs() < 1e-10,
                    "level {level} sample {k}"
                );
            }
        }
    }

    #[test]
    fn gauge_transformed_phase_examples() {
        assert_relative_eq!(
            gauge_transformed_phase(-PI / 2.0, 0.0, PI / 4.0),
            -3.0 * PI / 4.0,
            epsilon = 1e-15
        );
        assert_eq!(gauge_transformed_phase(0.37, 1.1, 1.1), 0.37);
    }

    #[test]
    fn transformed_phase_matches_pipeline() {
        let traj = spin_trajectory(0.9, 0.6, 200, 4.0);
        let gauge = GaugeFunction::sinusoidal(
            &[0.5, -0.3],
            &[1.1, 0.7],
            &[0.2, 1.4],
            traj.grid(),
        )
        .unwrap();
        let base = geometric_phase(&traj);
        let gauged = geometric_phase(&apply_gauge(&traj, &gauge).unwrap());
        for level in 0..2 {
            for k in [10, 100, 200] {
                let formula = gauge_transformed_phase(
                    base[level][k],
                    gauge.value(level, 0),
                    gauge.value(level, k),
                );
                assert!((gauged[level][k] - formula).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn phase_difference_requires_distinct_levels() {
        let traj = spin_trajectory(1.0, 0.2, 16, 1.0);
        let ledger = PhaseLedger::from_trajectory(&traj);
        assert!(matches!(
            ledger.phase_difference(1, 1, 4),
            Err(PhaseError::EqualLevels(1))
        ));
        assert!(ledger.phase_difference(0, 1, 4).is_ok());
    }

    #[test]
    fn phase_difference_gauge_shift_law() {
        let traj = spin_trajectory(PI / 2.5, 0.4, 128, 6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gauge = GaugeFunction::random_fourier(2, traj.grid(), 5, 1.0, &mut rng);
        let ledger = PhaseLedger::from_trajectory(&traj);
        let gauged_ledger =
            PhaseLedger::from_trajectory(&apply_gauge(&traj, &gauge).unwrap());
        for k in [3, 64, 128] {
            let base = ledger.phase_difference(0, 1, k).unwrap();
            let gauged = gauged_ledger.phase_difference(0, 1, k).unwrap();
            let shift = -(gauge.value(0, k) - gauge.value(0, 0))
                + (gauge.value(1, k) - gauge.value(1, 0));
            assert!((gauged - (base + shift)).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_gauge_grid_mismatch_rejected() {
        let traj = spin_trajectory(1.0, 0.2, 16, 1.0);
        let short = GaugeFunction::from_samples(vec![vec![0.0; 5], vec![0.0; 5]]).unwrap();
        assert!(matches!(
            apply_gauge(&traj, &short),
            Err(PhaseError::GridMismatch { .. })
        ));
    }

    #[test]
    fn random_fourier_is_single_valued_over_period() {
        let grid = TimeGrid::new(10.0, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let gauge = GaugeFunction::random_fourier(3, grid, 6, 1.0, &mut rng);
        for level in 0..3 {
            assert!((gauge.value(level, 0) - gauge.value(level, 200)).abs() < 1e-12);
        }
    }

    proptest! {
        /// Discrete gauge covariance: arbitrary per-frame phases shift the
        /// accumulated phase telescopically as long as no link wraps.
        #[test]
        fn discrete_gauge_covariance(
            increments in proptest::collection::vec(-2.0_f64..2.0, 32),
            level in 0_usize..2,
        ) {
            let traj = spin_trajectory(1.3, 0.7, 32, 2.0);
            let mut beta = vec![0.0_f64];
            for d in &increments {
                beta.push(beta.last().unwrap() + d);
            }
            let other: Vec<f64> = vec![0.0; 33];
            let rows = if level == 0 {
                vec![beta.clone(), other]
            } else {
                vec![other, beta.clone()]
            };
            let gauge = GaugeFunction::from_samples(rows).unwrap();
            let base = geometric_phase(&traj);
            let gauged = geometric_phase(&apply_gauge(&traj, &gauge).unwrap());
            for k in 0..33 {
                let expected = base[level][k] - (beta[k] - beta[0]);
                prop_assert!((gauged[level][k] - expected).abs() < 1e-10);
            }
        }
    }
}
