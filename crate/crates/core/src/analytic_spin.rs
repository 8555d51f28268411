//! Closed-form oracle for the spin-1/2 precessing-field model.
//!
//! Provides the instantaneous eigenvectors with arbitrary per-level gauge
//! functions f(t), g(t), the closed-form geometric phases
//!
//! ```text
//! γ_1(t) = -(f(t) - f(0)) - cos²(θ/2) ωt
//! γ_2(t) = -(g(t) - g(0)) - sin²(θ/2) ωt
//! ```
//!
//! and the exact rotating-frame solution of the Schrödinger equation for
//! the precessing field. The oracle is independent of the numerical
//! pipeline; the two meet through the gauge-transport helpers at the bottom
//! of this module, which express pipeline phases in the closed-form basis.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::evolution::{EvolutionError, StateVector};
use crate::fieldpath::{precessing_field, PrecessingFieldParams};
use crate::phases::geometric_phase;
use crate::spectral::SpectralTrajectory;

/// Relative distance from the ±z axis below which the eigenvector formulas
/// are replaced by their on-axis limit forms.
pub const AXIS_LIMIT_EPS: f64 = 1e-12;

/// Minimum pipeline/closed-form overlap magnitude accepted when aligning
/// bases; anything lower means the two do not describe the same level.
pub const BASIS_ALIGNMENT_MIN: f64 = 0.9;

#[derive(Debug, Error)]
pub enum AnalyticSpinError {
    #[error("field vanishes: instantaneous eigenvectors are undefined")]
    ZeroField,
    #[error("closed-form spin basis needs a two-level trajectory, got dimension {0}")]
    NotTwoLevel(usize),
    #[error("pipeline and closed-form eigenvectors misaligned at t = {t} (level {level}, |overlap| = {overlap:.3e})")]
    BasisMismatch { t: f64, level: usize, overlap: f64 },
    #[error("offset series shape mismatch: {0} levels vs {1}")]
    ShapeMismatch(usize, usize),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
}

/// Real sampler for one gauge function of t.
pub type GaugeSampler = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Arbitrary continuous gauge functions attached to the two levels:
/// f rephases the ground state, g the excited state.
#[derive(Clone)]
pub struct SpinGauge {
    f: GaugeSampler,
    g: GaugeSampler,
}

impl SpinGauge {
    pub fn new<F, G>(f: F, g: G) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            g: Arc::new(g),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn constant(f0: f64, g0: f64) -> Self {
        Self::new(move |_| f0, move |_| g0)
    }

    pub fn linear(f_rate: f64, g_rate: f64) -> Self {
        Self::new(move |t| f_rate * t, move |t| g_rate * t)
    }

    pub fn sinusoidal(f_amp: f64, f_freq: f64, g_amp: f64, g_freq: f64) -> Self {
        Self::new(
            move |t| f_amp * (f_freq * t).sin(),
            move |t| g_amp * (g_freq * t).sin(),
        )
    }

    /// Ground-level gauge f(t).
    pub fn ground(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    /// Excited-level gauge g(t).
    pub fn excited(&self, t: f64) -> f64 {
        (self.g)(t)
    }
}

impl std::fmt::Debug for SpinGauge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpinGauge").finish_non_exhaustive()
    }
}

/// Closed-form instantaneous eigenpair for one field value.
#[derive(Debug, Clone)]
pub struct AnalyticEigenvectors {
    /// Level 1 (energy -μB/2 for μ > 0).
    pub ground: StateVector,
    /// Level 2 (energy +μB/2 for μ > 0).
    pub excited: StateVector,
    /// True when the field sits on the ±z axis and an on-axis limit form
    /// was substituted; the azimuth of the limit is a gauge choice.
    pub gauge_arbitrary: bool,
}

/// Normalized eigenvectors of the spin-1/2 Zeeman operator at one instant,
/// rephased by the gauge functions. On the ±z axis the transverse direction
/// degenerates and a fixed azimuth-0 limit form is returned instead.
pub fn analytic_eigenvectors(
    field: [f64; 3],
    gauge: &SpinGauge,
    t: f64,
) -> Result<AnalyticEigenvectors, AnalyticSpinError> {
    let [bx, by, bz] = field;
    let b = (bx * bx + by * by + bz * bz).sqrt();
    if b == 0.0 {
        return Err(AnalyticSpinError::ZeroField);
    }
    let phase_f = C64::from_polar(1.0, gauge.ground(t));
    let phase_g = C64::from_polar(1.0, gauge.excited(t));
    let transverse = C64::new(bx, by);

    let make = |up: C64, down: C64| StateVector::new(DVector::from_vec(vec![up, down]));

    if b - bz < AXIS_LIMIT_EPS * b {
        // Field along +z: θ → 0 limit at azimuth 0.
        let ground = make(C64::new(0.0, 0.0), -phase_f)?;
        let excited = make(phase_g, C64::new(0.0, 0.0))?;
        return Ok(AnalyticEigenvectors {
            ground,
            excited,
            gauge_arbitrary: true,
        });
    }
    if b + bz < AXIS_LIMIT_EPS * b {
        // Field along -z: θ → π limit at azimuth 0.
        let ground = make(phase_f, C64::new(0.0, 0.0))?;
        let excited = make(C64::new(0.0, 0.0), phase_g)?;
        return Ok(AnalyticEigenvectors {
            ground,
            excited,
            gauge_arbitrary: true,
        });
    }

    let ground_up = ((b - bz) / (2.0 * b)).sqrt();
    let ground_down = -transverse / (2.0 * b * (b - bz)).sqrt();
    let excited_up = ((b + bz) / (2.0 * b)).sqrt();
    let excited_down = transverse / (2.0 * b * (b + bz)).sqrt();

    Ok(AnalyticEigenvectors {
        ground: make(phase_f * ground_up, phase_f * ground_down)?,
        excited: make(phase_g * excited_up, phase_g * excited_down)?,
        gauge_arbitrary: false,
    })
}

/// Closed-form geometric phases (γ_1, γ_2) at time t in the gauge-rephased
/// basis; gauge terms enter as -(f(t)-f(0)) and -(g(t)-g(0)).
pub fn analytic_phases(
    params: &PrecessingFieldParams,
    gauge: &SpinGauge,
    t: f64,
) -> (f64, f64) {
    let half = params.polar_angle() / 2.0;
    let wt = params.angular_frequency() * t;
    let gamma_1 = -(gauge.ground(t) - gauge.ground(0.0)) - half.cos().powi(2) * wt;
    let gamma_2 = -(gauge.excited(t) - gauge.excited(0.0)) - half.sin().powi(2) * wt;
    (gamma_1, gamma_2)
}

/// Exact solution of the Schrödinger equation for the precessing field:
/// the frame rotating with the field azimuth sees a static operator
///
/// ```text
/// H_rot = (μB/2)(sinθ σ_x + cosθ σ_z) - (ω/2) σ_z,
/// ```
///
/// so ψ(t) = e^{-iωt σ_z/2} · e^{-it H_rot} · ψ(0). Unit norm by
/// construction; fully independent of the stepping propagator.
pub fn rotating_frame_exact(
    params: &PrecessingFieldParams,
    coupling: f64,
    psi0: &StateVector,
    t: f64,
) -> StateVector {
    let half_mu_b = 0.5 * coupling * params.modulus();
    let dx = half_mu_b * params.polar_angle().sin();
    let dz = half_mu_b * params.polar_angle().cos() - 0.5 * params.angular_frequency();
    let norm = (dx * dx + dz * dz).sqrt();

    let (cos_term, sinc_term) = if norm > 0.0 {
        ((norm * t).cos(), (norm * t).sin() / norm)
    } else {
        (1.0, t)
    };
    // cos(|d|t) I - i sin(|d|t) d̂·σ, written with sin(|d|t)/|d| so the
    // |d| → 0 limit stays finite.
    let u00 = C64::new(cos_term, -sinc_term * dz);
    let u01 = C64::new(0.0, -sinc_term * dx);
    let u11 = C64::new(cos_term, sinc_term * dz);

    let a0 = psi0.amplitude(0);
    let a1 = psi0.amplitude(1);
    let rotated = [u00 * a0 + u01 * a1, u01 * a0 + u11 * a1];

    let wt_half = 0.5 * params.angular_frequency() * t;
    let amplitudes = DVector::from_vec(vec![
        C64::from_polar(1.0, -wt_half) * rotated[0],
        C64::from_polar(1.0, wt_half) * rotated[1],
    ]);
    StateVector::new(amplitudes).expect("unitary evolution preserves the norm")
}

fn wrap_to_pi(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let wrapped = (x + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if wrapped == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        wrapped
    }
}

/// Per-level phase offsets β_j(t_k) between the trajectory's eigenvectors
/// and the closed-form basis, unwrapped along the grid:
/// v_j(t_k) = e^{iβ_j(t_k)} φ_j(t_k).
pub fn basis_offset_series(
    traj: &SpectralTrajectory,
    params: &PrecessingFieldParams,
    gauge: &SpinGauge,
) -> Result<Vec<Vec<f64>>, AnalyticSpinError> {
    if traj.dimension() != 2 {
        return Err(AnalyticSpinError::NotTwoLevel(traj.dimension()));
    }
    let mut offsets = vec![Vec::with_capacity(traj.num_samples()); 2];
    for (k, frame) in traj.frames().iter().enumerate() {
        let t = traj.grid().time(k);
        let reference = analytic_eigenvectors(precessing_field(params, t), gauge, t)?;
        for (level, phi) in [&reference.ground, &reference.excited].into_iter().enumerate() {
            let overlap = phi
                .amplitudes()
                .dotc(&frame.eigenvector(level).clone_owned());
            let magnitude = overlap.norm();
            if magnitude < BASIS_ALIGNMENT_MIN {
                return Err(AnalyticSpinError::BasisMismatch {
                    t,
                    level,
                    overlap: magnitude,
                });
            }
            let raw = overlap.arg();
            let unwrapped = match offsets[level].last() {
                Some(prev) => prev + wrap_to_pi(raw - prev),
                None => raw,
            };
            offsets[level].push(unwrapped);
        }
    }
    Ok(offsets)
}

/// Transports raw pipeline phases into the closed-form basis:
/// γ^{(closed)}_j(t_k) = γ^{(raw)}_j(t_k) + β_j(t_k) - β_j(0).
pub fn transported_phase_series(
    raw: &[Vec<f64>],
    offsets: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, AnalyticSpinError> {
    if raw.len() != offsets.len() {
        return Err(AnalyticSpinError::ShapeMismatch(raw.len(), offsets.len()));
    }
    raw.iter()
        .zip(offsets)
        .map(|(gamma, beta)| {
            if gamma.len() != beta.len() {
                return Err(AnalyticSpinError::ShapeMismatch(gamma.len(), beta.len()));
            }
            Ok(gamma
                .iter()
                .zip(beta)
                .map(|(g, b)| g + b - beta[0])
                .collect())
        })
        .collect()
}

/// Convenience: accumulate the trajectory's geometric phases and transport
/// them into the closed-form basis in one call.
pub fn transported_phases(
    traj: &SpectralTrajectory,
    params: &PrecessingFieldParams,
    gauge: &SpinGauge,
) -> Result<Vec<Vec<f64>>, AnalyticSpinError> {
    let raw = geometric_phase(traj);
    let offsets = basis_offset_series(traj, params, gauge)?;
    transported_phase_series(&raw, &offsets)
}
