//! Instantaneous eigensystems along the time grid, with a smooth gauge.
//!
//! Eigenvalues are sorted ascending at every sample, so level 0 is the
//! ground state. Frame 0 gets a deterministic reference gauge (largest
//! eigenvector component made real and positive); every later frame is
//! phase-aligned to its predecessor so consecutive overlaps come out real
//! and positive. That makes the discretized Berry connection well defined:
//! link phases on a freshly continued trajectory vanish, and all gauge
//! content is carried by the eigenvectors themselves. Nonzero link phases
//! appear once a gauge transformation is applied (see the phases module).

use nalgebra::{DMatrix, DVector, DVectorView};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::fieldpath::TimeGrid;
use crate::hamiltonian::{HamiltonianError, HamiltonianFamily, HermitianOperator};

/// Degeneracy threshold: min gap below `1e-8 * max(1, spectral radius)`
/// aborts rather than attempting degenerate perturbation theory.
pub const DEGENERACY_TOL_FACTOR: f64 = 1e-8;

/// Consecutive-overlap magnitude below this means the grid is too coarse
/// (or a level crossed) and the continuation refuses to guess.
pub const CONTINUATION_OVERLAP_MIN: f64 = 0.5;

/// Orthonormality tolerance for externally supplied frames.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error("eigensolver failed to converge on a {dimension}x{dimension} operator")]
    ConvergenceFailure { dimension: usize },
    #[error("degenerate spectrum at t = {t}: min gap {gap:.3e} below tolerance {tolerance:.3e}")]
    NonDegenerateViolation { t: f64, gap: f64, tolerance: f64 },
    #[error("overlap magnitude {overlap:.3e} for level {level} between t = {prev_time} and t = {time}: refine the time grid")]
    RefineGrid {
        prev_time: f64,
        time: f64,
        level: usize,
        overlap: f64,
    },
    #[error("grid ends at {grid_end} but the family lasts only {duration}")]
    GridBeyondDuration { grid_end: f64, duration: f64 },
    #[error("frame dimensions disagree: {0}")]
    FrameMismatch(String),
    #[error("eigenvector columns are not orthonormal: |<v_{i}|v_{j}> - delta| = {deviation:.3e}")]
    NotOrthonormal {
        i: usize,
        j: usize,
        deviation: f64,
    },
}

/// Eigensystem of one instantaneous operator: ascending eigenvalues and the
/// matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    time: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
    min_gap: f64,
}

impl SpectralFrame {
    /// Assembles a frame from externally computed eigendata, checking shape,
    /// eigenvalue order and orthonormality.
    pub fn new(
        time: f64,
        eigenvalues: DVector<f64>,
        eigenvectors: DMatrix<C64>,
    ) -> Result<Self, SpectralError> {
        let d = eigenvalues.len();
        if eigenvectors.nrows() != d || eigenvectors.ncols() != d {
            return Err(SpectralError::FrameMismatch(format!(
                "{} eigenvalues but a {}x{} eigenvector matrix",
                d,
                eigenvectors.nrows(),
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.iter().zip(eigenvalues.iter().skip(1)).any(|(a, b)| a > b) {
            return Err(SpectralError::FrameMismatch(
                "eigenvalues must be ascending".into(),
            ));
        }
        for i in 0..d {
            for j in i..d {
                let expected = if i == j { 1.0 } else { 0.0 };
                let deviation =
                    (eigenvectors.column(i).dotc(&eigenvectors.column(j)) - expected).norm();
                if deviation > ORTHONORMALITY_TOL {
                    return Err(SpectralError::NotOrthonormal { i, j, deviation });
                }
            }
        }
        Ok(Self::from_sorted(time, eigenvalues, eigenvectors))
    }

    fn from_sorted(time: f64, eigenvalues: DVector<f64>, eigenvectors: DMatrix<C64>) -> Self {
        let min_gap = eigenvalues
            .iter()
            .zip(eigenvalues.iter().skip(1))
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min);
        Self {
            time,
            eigenvalues,
            eigenvectors,
            min_gap,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending instantaneous energies.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, level: usize) -> f64 {
        self.eigenvalues[level]
    }

    /// Eigenvector columns, aligned with [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, level: usize) -> DVectorView<'_, C64> {
        self.eigenvectors.column(level)
    }

    /// Minimum adjacent eigenvalue spacing (infinite for d = 1).
    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    fn degeneracy_tolerance(&self) -> f64 {
        let radius = self
            .eigenvalues
            .iter()
            .fold(0.0_f64, |acc, e| acc.max(e.abs()));
        DEGENERACY_TOL_FACTOR * radius.max(1.0)
    }
}

/// Ascending eigenvalues and orthonormal eigenvectors of a Hermitian
/// operator. Eigenvector phases are raw (solver-dependent) at this stage.
pub fn eigensystem(
    op: &HermitianOperator,
) -> Result<(DVector<f64>, DMatrix<C64>), SpectralError> {
    let d = op.dimension();
    let eig = nalgebra::SymmetricEigen::try_new(op.matrix().clone(), f64::EPSILON, 0)
        .ok_or(SpectralError::ConvergenceFailure { dimension: d })?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((eigenvalues, eigenvectors))
}

/// Deterministic reference gauge: rotate each column so its
/// largest-magnitude component (lowest index on ties) is real and positive.
pub fn reference_gauge(eigenvectors: &mut DMatrix<C64>) {
    for mut column in eigenvectors.column_iter_mut() {
        let mut pivot = 0;
        let mut best = 0.0_f64;
        for (i, z) in column.iter().enumerate() {
            let mag = z.norm();
            if mag > best {
                best = mag;
                pivot = i;
            }
        }
        let z = column[pivot];
        if z.norm() > 0.0 {
            let factor = z.conj() / z.norm();
            for entry in column.iter_mut() {
                *entry *= factor;
            }
        }
    }
}

/// Phase-aligns `raw` against `prev`: each eigenvector of `raw` is
/// multiplied by a unit complex number so that its overlap with the
/// corresponding column of `prev` is real and positive. The spanned ray is
/// untouched, only the phase changes.
pub fn continue_gauge(
    prev: &SpectralFrame,
    mut raw: SpectralFrame,
) -> Result<SpectralFrame, SpectralError> {
    if prev.dimension() != raw.dimension() {
        return Err(SpectralError::FrameMismatch(format!(
            "dimension {} followed by {}",
            prev.dimension(),
            raw.dimension()
        )));
    }
    for level in 0..raw.dimension() {
        let overlap = prev
            .eigenvector(level)
            .dotc(&raw.eigenvectors.column(level));
        let magnitude = overlap.norm();
        if magnitude < CONTINUATION_OVERLAP_MIN {
            return Err(SpectralError::RefineGrid {
                prev_time: prev.time,
                time: raw.time,
                level,
                overlap: magnitude,
            });
        }
        let factor = overlap.conj() / magnitude;
        for entry in raw.eigenvectors.column_mut(level).iter_mut() {
            *entry *= factor;
        }
    }
    Ok(raw)
}

/// Gauge-continued eigensystems over a full time grid.
#[derive(Debug, Clone)]
pub struct SpectralTrajectory {
    grid: TimeGrid,
    frames: Vec<SpectralFrame>,
}

impl SpectralTrajectory {
    /// Assembles a trajectory from externally built frames (one per grid
    /// sample, equal dimensions). No gauge convention is imposed here.
    pub fn from_frames(grid: TimeGrid, frames: Vec<SpectralFrame>) -> Result<Self, SpectralError> {
        if frames.len() != grid.num_samples() {
            return Err(SpectralError::FrameMismatch(format!(
                "{} frames for a grid with {} samples",
                frames.len(),
                grid.num_samples()
            )));
        }
        let d = frames[0].dimension();
        if frames.iter().any(|f| f.dimension() != d) {
            return Err(SpectralError::FrameMismatch(
                "frame dimensions differ along the trajectory".into(),
            ));
        }
        Ok(Self { grid, frames })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn frames(&self) -> &[SpectralFrame] {
        &self.frames
    }

    pub fn frame(&self, k: usize) -> &SpectralFrame {
        &self.frames[k]
    }

    pub fn dimension(&self) -> usize {
        self.frames[0].dimension()
    }

    pub fn num_samples(&self) -> usize {
        self.frames.len()
    }

    pub(crate) fn map_frames<F>(&self, f: F) -> Self
    where
        F: FnMut(usize, &SpectralFrame) -> SpectralFrame,
    {
        let mut f = f;
        Self {
            grid: self.grid,
            frames: self
                .frames
                .iter()
                .enumerate()
                .map(|(k, frame)| f(k, frame))
                .collect(),
        }
    }

    pub(crate) fn rephase_level(frame: &mut SpectralFrame, level: usize, factor: C64) {
        for entry in frame.eigenvectors.column_mut(level).iter_mut() {
            *entry *= factor;
        }
    }
}

/// Diagonalizes the family at every grid sample and chains the smooth gauge
/// from the deterministic frame-0 reference.
///
/// Fails with [`SpectralError::NonDegenerateViolation`] as soon as any
/// sample's spectrum gets too close to degenerate, and with
/// [`SpectralError::RefineGrid`] when consecutive eigenvectors decorrelate.
pub fn spectral_trajectory(
    fam: &HamiltonianFamily,
    grid: TimeGrid,
) -> Result<SpectralTrajectory, SpectralError> {
    if grid.duration() > fam.duration() {
        return Err(SpectralError::GridBeyondDuration {
            grid_end: grid.duration(),
            duration: fam.duration(),
        });
    }
    let mut frames = Vec::with_capacity(grid.num_samples());
    for k in 0..grid.num_samples() {
        let t = grid.time(k);
        let op = fam.at(t)?;
        let (eigenvalues, mut eigenvectors) = eigensystem(&op)?;
        if k == 0 {
            reference_gauge(&mut eigenvectors);
        }
        let frame = SpectralFrame::from_sorted(t, eigenvalues, eigenvectors);
        let tolerance = frame.degeneracy_tolerance();
        if frame.min_gap() < tolerance {
            return Err(SpectralError::NonDegenerateViolation {
                t,
                gap: frame.min_gap(),
                tolerance,
            });
        }
        let frame = match frames.last() {
            Some(prev) => continue_gauge(prev, frame)?,
            None => frame,
        };
        frames.push(frame);
    }
    Ok(SpectralTrajectory { grid, frames })
}
