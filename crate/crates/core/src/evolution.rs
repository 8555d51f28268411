//! State evolution: the adiabatic-theorem state assembled from the phase
//! ledger, and an independent exact propagator for validating it.
//!
//! The exact route steps the Schrödinger equation with a
//! midpoint-exponential rule,
//!
//! ```text
//! ψ(t_{k+1}) = exp(-i h H(t_k + h/2)) ψ(t_k),
//! ```
//!
//! second order in h and exactly norm-preserving (each step is unitary up to
//! rounding). The matrix exponential goes through the spectral decomposition
//! of the Hermitian step operator; no gap is required here, so the
//! propagator stays degeneracy-safe.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::fieldpath::TimeGrid;
use crate::hamiltonian::HamiltonianFamily;
use crate::phases::{GaugeFunction, PhaseLedger};
use crate::spectral::{eigensystem, SpectralError, SpectralFrame, SpectralTrajectory};

/// Allowed deviation of |⟨ψ|ψ⟩ - 1| for a [`StateVector`].
pub const STATE_NORM_TOL: f64 = 1e-10;

/// Completeness tolerance on Σ|a_j|² for decompositions.
pub const DECOMPOSITION_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("state norm deviates from 1 by {0:.3e}")]
    NotNormalized(f64),
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: state has {state}, counterpart has {other}")]
    DimensionMismatch { state: usize, other: usize },
    #[error("decomposition weights sum to {0}, expected 1")]
    IncompleteDecomposition(f64),
    #[error("level {level} out of range for dimension {dimension}")]
    LevelOutOfRange { level: usize, dimension: usize },
    #[error("duplicate level {0} in decomposition")]
    DuplicateLevel(usize),
    #[error("series have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("ledger and trajectory grids disagree")]
    GridMismatch,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Hamiltonian(#[from] crate::hamiltonian::HamiltonianError),
}

/// Normalized complex amplitude vector in the fixed computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Accepts a vector already normalized to within [`STATE_NORM_TOL`].
    pub fn new(amplitudes: DVector<C64>) -> Result<Self, EvolutionError> {
        let deviation = (amplitudes.norm() - 1.0).abs();
        if deviation > STATE_NORM_TOL {
            return Err(EvolutionError::NotNormalized(deviation));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self, EvolutionError> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(EvolutionError::ZeroVector);
        }
        Ok(Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    /// Computational basis vector e_index.
    pub fn basis_state(dimension: usize, index: usize) -> Result<Self, EvolutionError> {
        if index >= dimension {
            return Err(EvolutionError::LevelOutOfRange {
                level: index,
                dimension,
            });
        }
        let mut amplitudes = DVector::zeros(dimension);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn amplitude(&self, i: usize) -> C64 {
        self.amplitudes[i]
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Coefficients of the initial state in the frame-0 instantaneous basis,
/// attached to explicit level indices. Levels omitted here carry zero weight.
#[derive(Debug, Clone)]
pub struct InitialDecomposition {
    levels: Vec<usize>,
    coefficients: Vec<C64>,
}

impl InitialDecomposition {
    pub fn new(levels: Vec<usize>, coefficients: Vec<C64>) -> Result<Self, EvolutionError> {
        if levels.len() != coefficients.len() {
            return Err(EvolutionError::LengthMismatch(
                levels.len(),
                coefficients.len(),
            ));
        }
        let mut seen = levels.clone();
        seen.sort_unstable();
        for pair in seen.windows(2) {
            if pair[0] == pair[1] {
                return Err(EvolutionError::DuplicateLevel(pair[0]));
            }
        }
        let weight: f64 = coefficients.iter().map(|a| a.norm_sqr()).sum();
        if (weight - 1.0).abs() > DECOMPOSITION_NORM_TOL {
            return Err(EvolutionError::IncompleteDecomposition(weight));
        }
        Ok(Self {
            levels,
            coefficients,
        })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    /// Number of participating levels M.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Coefficients re-expressed in the rephased basis: ã_j = e^{-iα_j(0)} a_j.
    pub fn gauge_shifted(&self, gauge: &GaugeFunction) -> Result<Self, EvolutionError> {
        let coefficients = self
            .levels
            .iter()
            .zip(&self.coefficients)
            .map(|(&level, a)| {
                if level >= gauge.levels() {
                    return Err(EvolutionError::LevelOutOfRange {
                        level,
                        dimension: gauge.levels(),
                    });
                }
                Ok(a * C64::from_polar(1.0, -gauge.value(level, 0)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            levels: self.levels.clone(),
            coefficients,
        })
    }
}

/// Projects ψ(0) onto the frame-0 basis: a_j = ⟨v_j(0)|ψ(0)⟩ for every
/// level. Completeness of the basis forces Σ|a_j|² = 1.
pub fn decompose_initial(
    psi0: &StateVector,
    frame0: &SpectralFrame,
) -> Result<InitialDecomposition, EvolutionError> {
    if psi0.dimension() != frame0.dimension() {
        return Err(EvolutionError::DimensionMismatch {
            state: psi0.dimension(),
            other: frame0.dimension(),
        });
    }
    let coefficients: Vec<C64> = (0..frame0.dimension())
        .map(|j| frame0.eigenvector(j).dotc(psi0.amplitudes()))
        .collect();
    InitialDecomposition::new((0..frame0.dimension()).collect(), coefficients)
}

/// Adiabatic-theorem state at sample k:
/// Σ_j a_j · e^{iγ_j(t_k)} · e^{-i t_k ⟨E_j(t_k)⟩} · v_j(t_k).
pub fn adiabatic_state(
    decomp: &InitialDecomposition,
    traj: &SpectralTrajectory,
    ledger: &PhaseLedger,
    sample: usize,
) -> Result<StateVector, EvolutionError> {
    if ledger.grid() != traj.grid() || ledger.levels() != traj.dimension() {
        return Err(EvolutionError::GridMismatch);
    }
    let frame = traj.frame(sample);
    let mut amplitudes: DVector<C64> = DVector::zeros(traj.dimension());
    for (&level, a) in decomp.levels().iter().zip(decomp.coefficients()) {
        if level >= traj.dimension() {
            return Err(EvolutionError::LevelOutOfRange {
                level,
                dimension: traj.dimension(),
            });
        }
        let phase = C64::from_polar(1.0, ledger.geometric(level, sample))
            * ledger.dynamical_phase_factor(level, sample);
        amplitudes += frame.eigenvector(level) * (a * phase);
    }
    StateVector::new(amplitudes)
}

/// Unitary step operator exp(-i h H) through the spectral decomposition.
fn exponential_step(h: f64, op: &crate::hamiltonian::HermitianOperator) -> Result<DMatrix<C64>, EvolutionError> {
    let (vals, vecs) = eigensystem(op)?;
    let phases = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|e| C64::from_polar(1.0, -h * e)),
    );
    Ok(&vecs * DMatrix::from_diagonal(&phases) * vecs.adjoint())
}

/// Integrates the Schrödinger equation over the grid, returning the state at
/// every sample (the first entry is ψ(0) itself).
pub fn exact_propagate(
    fam: &HamiltonianFamily,
    psi0: &StateVector,
    grid: TimeGrid,
) -> Result<Vec<StateVector>, EvolutionError> {
    if psi0.dimension() != fam.dimension() {
        return Err(EvolutionError::DimensionMismatch {
            state: psi0.dimension(),
            other: fam.dimension(),
        });
    }
    if grid.duration() > fam.duration() {
        return Err(EvolutionError::Spectral(SpectralError::GridBeyondDuration {
            grid_end: grid.duration(),
            duration: fam.duration(),
        }));
    }
    let h = grid.step_size();
    let mut states = Vec::with_capacity(grid.num_samples());
    let mut current = psi0.amplitudes().clone();
    states.push(psi0.clone());
    for k in 0..grid.steps() {
        let midpoint = 0.5 * (grid.time(k) + grid.time(k + 1));
        let step = exponential_step(h, &fam.at(midpoint)?)?;
        current = &step * current;
        // The step is unitary in exact arithmetic; rescaling here keeps
        // rounding from compounding into a norm drift over long runs.
        let norm = current.norm();
        current /= C64::new(norm, 0.0);
        states.push(StateVector::new(current.clone())?);
    }
    Ok(states)
}

/// Global-phase-insensitive distance per sample:
/// √(2 - 2|⟨ψ_exact|ψ_adiabatic⟩|).
pub fn adiabatic_deviation(
    exact: &[StateVector],
    adiabatic: &[StateVector],
) -> Result<Vec<f64>, EvolutionError> {
    if exact.len() != adiabatic.len() {
        return Err(EvolutionError::LengthMismatch(
            exact.len(),
            adiabatic.len(),
        ));
    }
    exact
        .iter()
        .zip(adiabatic)
        .map(|(e, a)| {
            if e.dimension() != a.dimension() {
                return Err(EvolutionError::DimensionMismatch {
                    state: e.dimension(),
                    other: a.dimension(),
                });
            }
            Ok((2.0 - 2.0 * e.inner(a).norm()).max(0.0).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldpath::{FieldPath, PrecessingFieldParams};
    use crate::hamiltonian::SpinModelParams;
    use crate::spectral::spectral_trajectory;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn spin_setup(
        theta: f64,
        omega: f64,
        steps: usize,
        duration: f64,
    ) -> (HamiltonianFamily, TimeGrid, SpectralTrajectory) {
        let params = PrecessingFieldParams::new(1.0, theta, omega).unwrap();
        let path = FieldPath::precessing(params, duration).unwrap();
        let fam =
            HamiltonianFamily::spin_half(SpinModelParams::new(1.0).unwrap(), path).unwrap();
        let grid = TimeGrid::new(duration, steps).unwrap();
        let traj = spectral_trajectory(&fam, grid).unwrap();
        (fam, grid, traj)
    }

    fn random_state(d: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let v = DVector::from_fn(d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        StateVector::normalized(v).unwrap()
    }

    #[test]
    fn decompose_basis_vector() {
        let (_, _, traj) = spin_setup(1.0, 0.3, 16, 1.0);
        let v0 = StateVector::new(traj.frame(0).eigenvector(0).clone_owned()).unwrap();
        let decomp = decompose_initial(&v0, traj.frame(0)).unwrap();
        assert!((decomp.coefficients()[0].norm() - 1.0).abs() < 1e-14);
        assert!(decomp.coefficients()[1].norm() < 1e-14);
    }

    #[test]
    fn decompose_equal_superposition() {
        let (_, _, traj) = spin_setup(1.0, 0.3, 16, 1.0);
        let frame = traj.frame(0);
        let sum = (frame.eigenvector(0) + frame.eigenvector(1))
            * C64::new(1.0 / 2.0_f64.sqrt(), 0.0);
        let psi0 = StateVector::new(sum).unwrap();
        let decomp = decompose_initial(&psi0, frame).unwrap();
        for a in decomp.coefficients() {
            assert_relative_eq!(a.norm(), 1.0 / 2.0_f64.sqrt(), epsilon = 1e-13);
        }
    }

    #[test]
    fn decompose_round_trips_random_states() {
        let (_, _, traj) = spin_setup(0.7, 0.2, 8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let psi0 = random_state(2, &mut rng);
            let decomp = decompose_initial(&psi0, traj.frame(0)).unwrap();
            let mut recon: DVector<C64> = DVector::zeros(2);
            for (&level, a) in decomp.levels().iter().zip(decomp.coefficients()) {
                recon += traj.frame(0).eigenvector(level) * *a;
            }
            assert!((recon - psi0.amplitudes()).norm() < 1e-12);
        }
    }

    #[test]
    fn adiabatic_state_reproduces_initial_state() {
        let (_, _, traj) = spin_setup(PI / 3.0, 0.05, 32, 2.0);
        let ledger = PhaseLedger::from_trajectory(&traj);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let psi0 = random_state(2, &mut rng);
        let decomp = decompose_initial(&psi0, traj.frame(0)).unwrap();
        let rebuilt = adiabatic_state(&decomp, &traj, &ledger, 0).unwrap();
        assert!((rebuilt.amplitudes() - psi0.amplitudes()).norm() < 1e-13);
    }

    #[test]
    fn single_level_population_is_preserved() {
        let (_, _, traj) = spin_setup(PI / 4.0, 0.02, 128, 10.0);
        let ledger = PhaseLedger::from_trajectory(&traj);
        let decomp =
            InitialDecomposition::new(vec![0], vec![C64::new(1.0, 0.0)]).unwrap();
        for k in [0, 31, 64, 128] {
            let psi = adiabatic_state(&decomp, &traj, &ledger, k).unwrap();
            let overlap = traj
                .frame(k)
                .eigenvector(0)
                .dotc(psi.amplitudes())
                .norm();
            assert_relative_eq!(overlap, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn stationary_state_picks_up_only_dynamical_phase() {
        let omega0 = 0.8;
        let path = FieldPath::from_fn(3, 5.0, |_| vec![0.0, 0.0, 1.0]).unwrap();
        let fam = HamiltonianFamily::spin_half(
            SpinModelParams::new(omega0).unwrap(),
            path,
        )
        .unwrap();
        let grid = TimeGrid::new(5.0, 64).unwrap();
        let up = StateVector::basis_state(2, 0).unwrap();
        let states = exact_propagate(&fam, &up, grid).unwrap();
        for (k, state) in states.iter().enumerate() {
            let t = grid.time(k);
            let expected = C64::from_polar(1.0, -omega0 * t / 2.0);
            assert!((state.amplitude(0) - expected).norm() < 1e-12);
            assert!(state.amplitude(1).norm() < 1e-13);
        }
    }

    #[test]
    fn propagator_preserves_norm_over_many_steps() {
        let (fam, _, _) = spin_setup(PI / 3.0, 0.4, 16, 40.0);
        let grid = TimeGrid::new(40.0, 100_000).unwrap();
        let psi0 = StateVector::basis_state(2, 0).unwrap();
        let states = exact_propagate(&fam, &psi0, grid).unwrap();
        let drift = states
            .iter()
            .map(|s| (s.norm() - 1.0).abs())
            .fold(0.0_f64, f64::max);
        assert!(drift < 1e-12, "norm drift {drift}");
    }

    #[test]
    fn deviation_basics() {
        let up = StateVector::basis_state(2, 0).unwrap();
        let down = StateVector::basis_state(2, 1).unwrap();
        let same = adiabatic_deviation(&[up.clone()], &[up.clone()]).unwrap();
        assert_eq!(same[0], 0.0);
        let ortho = adiabatic_deviation(&[up.clone()], &[down]).unwrap();
        assert_relative_eq!(ortho[0], 2.0_f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn deviation_ignores_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_state(3, &mut rng);
        let b = random_state(3, &mut rng);
        let rotated =
            StateVector::new(b.amplitudes() * C64::from_polar(1.0, 1.234)).unwrap();
        let plain = adiabatic_deviation(std::slice::from_ref(&a), std::slice::from_ref(&b)).unwrap();
        let twisted = adiabatic_deviation(&[a], &[rotated]).unwrap();
        assert_relative_eq!(plain[0], twisted[0], epsilon = 1e-12);
    }

    #[test]
    fn decomposition_validation() {
        assert!(matches!(
            InitialDecomposition::new(vec![0, 0], vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            Err(EvolutionError::DuplicateLevel(0))
        ));
        assert!(matches!(
            InitialDecomposition::new(vec![0], vec![C64::new(0.5, 0.0)]),
            Err(EvolutionError::IncompleteDecomposition(_))
        ));
    }

    #[test]
    fn state_norm_validation() {
        let long = DVector::from_vec(vec![C64::new(2.0, 0.0)]);
        assert!(matches!(
            StateVector::new(long.clone()),
            Err(EvolutionError::NotNormalized(_))
        ));
        assert!(StateVector::normalized(long).is_ok());
        assert!(matches!(
            StateVector::normalized(DVector::zeros(2)),
            Err(EvolutionError::ZeroVector)
        ));
    }
}
