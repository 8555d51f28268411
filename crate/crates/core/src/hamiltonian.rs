//! Instantaneous Hermitian operators H(R(t)) built from field paths.
//!
//! Covers the spin-1/2 Zeeman model and generic N-level families whose
//! operator is an arbitrary pure function of the field vector. Dense
//! matrices throughout; target dimensions are small (d ≲ 16).

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::fieldpath::FieldPath;

/// Absolute tolerance on |H[i][j] - conj(H[j][i])|.
pub const HERMITICITY_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum HamiltonianError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: |H[{i},{j}] - conj(H[{j},{i}])| = {deviation:.3e}")]
    NotHermitian {
        i: usize,
        j: usize,
        deviation: f64,
    },
    #[error("coupling constant must be nonzero and finite")]
    BadCoupling,
    #[error("time {t} lies outside the family duration [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("spin-1/2 model needs a 3-component field path, got dimension {0}")]
    FieldDimensionMismatch(usize),
    #[error("builder produced dimension {got}, expected {expected}")]
    BuilderDimensionMismatch { expected: usize, got: usize },
    #[error("matrix family needs one term per field component: {terms} terms for a {field_dim}-component path")]
    TermCountMismatch { terms: usize, field_dim: usize },
    #[error("term {index} has dimension {got}, expected {expected}")]
    TermDimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
}

/// Square complex matrix validated to be Hermitian at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(entries: DMatrix<C64>) -> Result<Self, HamiltonianError> {
        if entries.nrows() != entries.ncols() {
            return Err(HamiltonianError::NotSquare {
                rows: entries.nrows(),
                cols: entries.ncols(),
            });
        }
        for i in 0..entries.nrows() {
            for j in i..entries.ncols() {
                let deviation = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if deviation > HERMITICITY_TOL {
                    return Err(HamiltonianError::NotHermitian { i, j, deviation });
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }
}

/// Zeeman coupling μ = g·μ_B, folded into one constant (ħ = 1 units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinModelParams {
    coupling: f64,
}

impl SpinModelParams {
    pub fn new(coupling: f64) -> Result<Self, HamiltonianError> {
        if coupling == 0.0 || !coupling.is_finite() {
            return Err(HamiltonianError::BadCoupling);
        }
        Ok(Self { coupling })
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

/// (μ/2)(B_x σ_x + B_y σ_y + B_z σ_z) in the {|↑⟩, |↓⟩} basis.
///
/// Eigenvalues are ∓μ|B|/2; for μ > 0 the ground state lies along -B.
pub fn spin_half_hamiltonian(params: &SpinModelParams, field: [f64; 3]) -> HermitianOperator {
    let half = 0.5 * params.coupling;
    let [bx, by, bz] = field;
    // Hermitian by construction; skip the runtime check.
    HermitianOperator {
        entries: DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(half * bz, 0.0),
                C64::new(half * bx, -half * by),
                C64::new(half * bx, half * by),
                C64::new(-half * bz, 0.0),
            ],
        ),
    }
}

/// Pure function mapping a field vector to a (to-be-verified) Hermitian matrix.
pub type OperatorBuilder = Arc<dyn Fn(&[f64]) -> DMatrix<C64> + Send + Sync>;

/// A field path together with a builder turning field vectors into operators.
#[derive(Clone)]
pub struct HamiltonianFamily {
    path: FieldPath,
    dimension: usize,
    builder: OperatorBuilder,
}

impl HamiltonianFamily {
    pub fn new<F>(path: FieldPath, dimension: usize, builder: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<C64> + Send + Sync + 'static,
    {
        Self {
            path,
            dimension,
            builder: Arc::new(builder),
        }
    }

    /// Spin-1/2 family over a 3-component field path.
    pub fn spin_half(params: SpinModelParams, path: FieldPath) -> Result<Self, HamiltonianError> {
        if path.dimension() != 3 {
            return Err(HamiltonianError::FieldDimensionMismatch(path.dimension()));
        }
        Ok(Self::new(path, 2, move |field| {
            spin_half_hamiltonian(&params, [field[0], field[1], field[2]]).into_matrix()
        }))
    }

    /// Linear family H(R) = Σ_l X_l M_l with one constant Hermitian term per
    /// field component.
    pub fn from_terms(
        path: FieldPath,
        terms: Vec<HermitianOperator>,
    ) -> Result<Self, HamiltonianError> {
        if terms.len() != path.dimension() {
            return Err(HamiltonianError::TermCountMismatch {
                terms: terms.len(),
                field_dim: path.dimension(),
            });
        }
        let dimension = terms[0].dimension();
        for (index, term) in terms.iter().enumerate() {
            if term.dimension() != dimension {
                return Err(HamiltonianError::TermDimensionMismatch {
                    index,
                    expected: dimension,
                    got: term.dimension(),
                });
            }
        }
        let matrices: Vec<DMatrix<C64>> = terms.into_iter().map(|t| t.into_matrix()).collect();
        Ok(Self::new(path, dimension, move |field| {
            let mut h = DMatrix::zeros(dimension, dimension);
            for (x, m) in field.iter().zip(matrices.iter()) {
                h += m * C64::new(*x, 0.0);
            }
            h
        }))
    }

    /// Instantaneous operator at time t, with the Hermiticity and dimension
    /// of the builder output verified.
    pub fn at(&self, t: f64) -> Result<HermitianOperator, HamiltonianError> {
        if !(0.0..=self.path.duration()).contains(&t) {
            return Err(HamiltonianError::TimeOutOfRange {
                t,
                duration: self.path.duration(),
            });
        }
        let field = self.path.sample(t);
        let matrix = (self.builder)(&field);
        if matrix.nrows() != self.dimension || matrix.ncols() != self.dimension {
            return Err(HamiltonianError::BuilderDimensionMismatch {
                expected: self.dimension,
                got: matrix.nrows(),
            });
        }
        HermitianOperator::new(matrix)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn path(&self) -> &FieldPath {
        &self.path
    }

    pub fn duration(&self) -> f64 {
        self.path.duration()
    }
}

impl std::fmt::Debug for HamiltonianFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianFamily")
            .field("dimension", &self.dimension)
            .field("duration", &self.duration())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldpath::PrecessingFieldParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spin(mu: f64) -> SpinModelParams {
        SpinModelParams::new(mu).unwrap()
    }

    #[test]
    fn spin_half_along_z_is_diagonal() {
        let b = 0.7;
        let h = spin_half_hamiltonian(&spin(1.0), [0.0, 0.0, b]);
        let m = h.matrix();
        assert_eq!(m[(0, 0)], C64::new(b / 2.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(-b / 2.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn spin_half_zero_field_vanishes() {
        let h = spin_half_hamiltonian(&spin(1.0), [0.0, 0.0, 0.0]);
        assert!(h.matrix().iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn spin_half_pauli_x_block() {
        let h = spin_half_hamiltonian(&spin(2.0), [1.0, 0.0, 0.0]);
        let m = h.matrix();
        assert_eq!(m[(0, 0)], C64::new(0.0, 0.0));
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 1)], C64::new(0.0, 0.0));
    }

    #[test]
    fn spin_half_is_traceless() {
        let fields = [[0.3, -1.2, 0.4], [10.0, 0.0, -3.0], [0.0, 5.5, 0.0]];
        for field in fields {
            let h = spin_half_hamiltonian(&spin(1.7), field);
            let trace = h.matrix()[(0, 0)] + h.matrix()[(1, 1)];
            assert!(trace.norm() < 1e-14);
        }
    }

    #[test]
    fn non_hermitian_matrix_rejected() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.5, 0.1),
                C64::new(0.5, 0.1),
                C64::new(2.0, 0.0),
            ],
        );
        assert!(matches!(
            HermitianOperator::new(m),
            Err(HamiltonianError::NotHermitian { .. })
        ));
        let diag_imag = DMatrix::from_row_slice(
            1,
            1,
            &[C64::new(1.0, 0.5)],
        );
        assert!(HermitianOperator::new(diag_imag).is_err());
    }

    #[test]
    fn frozen_axis_family_is_constant() {
        let params = PrecessingFieldParams::new(1.0, 0.0, 1.0).unwrap();
        let path = FieldPath::precessing(params, 10.0).unwrap();
        let fam = HamiltonianFamily::spin_half(spin(1.0), path).unwrap();
        for t in [0.0, 1.3, 7.7, 10.0] {
            let h = fam.at(t).unwrap();
            assert_relative_eq!(h.matrix()[(0, 0)].re, 0.5, max_relative = 1e-15);
            assert_relative_eq!(h.matrix()[(1, 1)].re, -0.5, max_relative = 1e-15);
            assert!(h.matrix()[(0, 1)].norm() < 1e-16);
        }
    }

    #[test]
    fn linear_ramp_family() {
        let path = FieldPath::piecewise_linear(vec![(0.0, vec![0.0]), (1.0, vec![1.0])]).unwrap();
        let fam = HamiltonianFamily::new(path, 2, |field| {
            let c = C64::new(0.5 * field[0], 0.0);
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c, -c]))
        });
        let h = fam.at(0.25).unwrap();
        assert_relative_eq!(h.matrix()[(0, 0)].re, 0.125, max_relative = 1e-15);
        assert_relative_eq!(h.matrix()[(1, 1)].re, -0.125, max_relative = 1e-15);
    }

    #[test]
    fn time_outside_duration_rejected() {
        let params = PrecessingFieldParams::new(1.0, 0.3, 1.0).unwrap();
        let path = FieldPath::precessing(params, 2.0).unwrap();
        let fam = HamiltonianFamily::spin_half(spin(1.0), path).unwrap();
        assert!(matches!(
            fam.at(2.5),
            Err(HamiltonianError::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            fam.at(-0.1),
            Err(HamiltonianError::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn from_terms_builds_linear_combination() {
        let path =
            FieldPath::piecewise_linear(vec![(0.0, vec![1.0, 0.0]), (1.0, vec![0.0, 2.0])])
                .unwrap();
        let sx = HermitianOperator::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        ))
        .unwrap();
        let sz = HermitianOperator::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
            ],
        ))
        .unwrap();
        let fam = HamiltonianFamily::from_terms(path, vec![sx, sz]).unwrap();
        let h = fam.at(0.5).unwrap();
        assert_relative_eq!(h.matrix()[(0, 1)].re, 0.5, max_relative = 1e-15);
        assert_relative_eq!(h.matrix()[(0, 0)].re, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn from_terms_count_mismatch_rejected() {
        let path =
            FieldPath::piecewise_linear(vec![(0.0, vec![1.0, 0.0]), (1.0, vec![0.0, 2.0])])
                .unwrap();
        let id = HermitianOperator::new(DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            HamiltonianFamily::from_terms(path, vec![id]),
            Err(HamiltonianError::TermCountMismatch { .. })
        ));
    }

    proptest! {
        /// Randomized builders stay Hermitian along the whole path.
        #[test]
        fn random_family_is_hermitian_everywhere(
            seed_re in proptest::collection::vec(-2.0_f64..2.0, 16),
            seed_im in proptest::collection::vec(-2.0_f64..2.0, 16),
            t in 0.0_f64..1.0,
        ) {
            let path = FieldPath::piecewise_linear(
                vec![(0.0, vec![0.0]), (1.0, vec![1.0])],
            ).unwrap();
            let base = DMatrix::from_fn(4, 4, |i, j| {
                C64::new(seed_re[4 * i + j], seed_im[4 * i + j])
            });
            let herm = (&base + base.adjoint()) * C64::new(0.5, 0.0);
            let fam = HamiltonianFamily::new(path, 4, move |field| {
                &herm * C64::new(1.0 + field[0], 0.0)
            });
            prop_assert!(fam.at(t).is_ok());
        }

        #[test]
        fn spin_eigenvalues_are_plus_minus_half_mu_b(
            mu in 0.1_f64..4.0,
            bx in -3.0_f64..3.0,
            by in -3.0_f64..3.0,
            bz in -3.0_f64..3.0,
        ) {
            prop_assume!(bx * bx + by * by + bz * bz > 1e-4);
            let h = spin_half_hamiltonian(&spin(mu), [bx, by, bz]);
            let b = (bx * bx + by * by + bz * bz).sqrt();
            // 2x2 traceless Hermitian: eigenvalues are ±sqrt(-det).
            let m = h.matrix();
            let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
            let lambda = (-det).sqrt();
            prop_assert!((lambda - mu * b / 2.0).abs() <= 1e-12 * (mu * b / 2.0));
        }
    }
}
