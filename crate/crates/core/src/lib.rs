//! Geometric and dynamical phases of quantum states driven adiabatically by
//! time-dependent classical fields.
//!
//! The pipeline runs field path → instantaneous Hermitian operator →
//! gauge-continued eigensystems → accumulated geometric/dynamical phases →
//! adiabatic state, with an independent exact propagator and a closed-form
//! spin-1/2 oracle for cross-validation. Phases of individual levels depend
//! on the instantaneous basis chosen; expectation values of observables do
//! not, and the `observables` module makes that cancellation executable.
//!
//! Units: ħ = 1 throughout. The spin-1/2 Zeeman energies are ±μB/2 in code
//! units, with the coupling μ folding g-factor and magneton into one
//! constant. Level indices are 0-based; level 0 is the ground state.

pub mod analytic_spin;
pub mod evolution;
pub mod fieldpath;
pub mod hamiltonian;
pub mod observables;
pub mod phases;
pub mod spectral;

pub use analytic_spin::{AnalyticEigenvectors, SpinGauge};
pub use evolution::{InitialDecomposition, StateVector};
pub use fieldpath::{FieldPath, PrecessingFieldParams, TimeGrid};
pub use hamiltonian::{HamiltonianFamily, HermitianOperator, SpinModelParams};
pub use observables::{GaugeInvarianceReport, ObservableOp};
pub use phases::{GaugeFunction, PhaseLedger};
pub use spectral::{SpectralFrame, SpectralTrajectory};
