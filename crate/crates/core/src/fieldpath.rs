//! Classical driving-field trajectories R(t) and uniform time grids.
//!
//! A [`FieldPath`] maps t ∈ [0, T] to an m-component real vector. Paths are
//! plain samplers (closed-form or piecewise-linear), immutable after
//! construction and safe to evaluate from multiple threads.

use std::sync::Arc;

use thiserror::Error;

/// Sampler signature shared by all path kinds.
pub type FieldSampler = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Error)]
pub enum FieldPathError {
    #[error("piecewise path needs at least two knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot {index} has dimension {got}, expected {expected}")]
    KnotDimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("knot times must start at 0 and increase strictly (knot {index} at t = {time})")]
    NonMonotoneKnots { index: usize, time: f64 },
    #[error("field modulus must be positive, got {0}")]
    NonPositiveModulus(f64),
    #[error("polar angle must lie in [0, pi], got {0}")]
    PolarAngleOutOfRange(f64),
    #[error("angular frequency must be nonnegative, got {0}")]
    NegativeFrequency(f64),
    #[error("duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("time grid needs at least one step")]
    EmptyGrid,
    #[error("path dimension must be at least 1")]
    ZeroDimension,
    #[error("sampler returned a non-finite component at t = {0}")]
    NonFiniteSample(f64),
    #[error("sampler returned {got} components at t = {t}, expected {expected}")]
    SampleDimensionMismatch { t: f64, expected: usize, got: usize },
}

/// Constant-modulus field precessing about the z axis: fixed polar angle,
/// uniform azimuthal rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecessingFieldParams {
    modulus: f64,
    polar_angle: f64,
    angular_frequency: f64,
}

impl PrecessingFieldParams {
    pub fn new(
        modulus: f64,
        polar_angle: f64,
        angular_frequency: f64,
    ) -> Result<Self, FieldPathError> {
        if !(modulus > 0.0) || !modulus.is_finite() {
            return Err(FieldPathError::NonPositiveModulus(modulus));
        }
        if !(0.0..=std::f64::consts::PI).contains(&polar_angle) {
            return Err(FieldPathError::PolarAngleOutOfRange(polar_angle));
        }
        if !(angular_frequency >= 0.0) || !angular_frequency.is_finite() {
            return Err(FieldPathError::NegativeFrequency(angular_frequency));
        }
        Ok(Self {
            modulus,
            polar_angle,
            angular_frequency,
        })
    }

    /// Field strength B.
    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// Angle against the z axis, in radians.
    pub fn polar_angle(&self) -> f64 {
        self.polar_angle
    }

    /// Precession frequency about the z axis, in radians per unit time.
    pub fn angular_frequency(&self) -> f64 {
        self.angular_frequency
    }
}

/// (B sinθ cos ωt, B sinθ sin ωt, B cosθ).
pub fn precessing_field(params: &PrecessingFieldParams, t: f64) -> [f64; 3] {
    let phase = params.angular_frequency * t;
    let transverse = params.modulus * params.polar_angle.sin();
    [
        transverse * phase.cos(),
        transverse * phase.sin(),
        params.modulus * params.polar_angle.cos(),
    ]
}

/// Uniform grid t_k = kT/N, k = 0..=N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    duration: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(duration: f64, steps: usize) -> Result<Self, FieldPathError> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(FieldPathError::BadDuration(duration));
        }
        if steps == 0 {
            return Err(FieldPathError::EmptyGrid);
        }
        Ok(Self { duration, steps })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Number of steps N; the grid has N + 1 samples.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_samples(&self) -> usize {
        self.steps + 1
    }

    /// Spacing h = T/N.
    pub fn step_size(&self) -> f64 {
        self.duration / self.steps as f64
    }

    /// k-th sample; the last sample is exactly `duration`.
    pub fn time(&self, k: usize) -> f64 {
        debug_assert!(k <= self.steps);
        if k == self.steps {
            self.duration
        } else {
            k as f64 * self.duration / self.steps as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |k| self.time(k))
    }
}

/// Classical parameter trajectory R(t) = (X_1, ..., X_m) on [0, T].
#[derive(Clone)]
pub struct FieldPath {
    dimension: usize,
    duration: f64,
    sampler: FieldSampler,
}

impl FieldPath {
    /// Wraps an arbitrary sampler, spot-checking finiteness and dimension at
    /// t = 0, T/2 and T.
    pub fn from_fn<F>(dimension: usize, duration: f64, sampler: F) -> Result<Self, FieldPathError>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(FieldPathError::ZeroDimension);
        }
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(FieldPathError::BadDuration(duration));
        }
        let path = Self {
            dimension,
            duration,
            sampler: Arc::new(sampler),
        };
        for t in [0.0, duration / 2.0, duration] {
            path.checked_sample(t)?;
        }
        Ok(path)
    }

    /// Precessing field of fixed modulus, evaluated over [0, duration].
    pub fn precessing(params: PrecessingFieldParams, duration: f64) -> Result<Self, FieldPathError> {
        Self::from_fn(3, duration, move |t| precessing_field(&params, t).to_vec())
    }

    /// Linear interpolation between knots; exact at the knots. Needs at least
    /// two knots, strictly increasing times, the first at t = 0.
    pub fn piecewise_linear(knots: Vec<(f64, Vec<f64>)>) -> Result<Self, FieldPathError> {
        if knots.len() < 2 {
            return Err(FieldPathError::TooFewKnots(knots.len()));
        }
        let dimension = knots[0].1.len();
        if dimension == 0 {
            return Err(FieldPathError::ZeroDimension);
        }
        if knots[0].0 != 0.0 {
            return Err(FieldPathError::NonMonotoneKnots {
                index: 0,
                time: knots[0].0,
            });
        }
        for (index, (time, values)) in knots.iter().enumerate() {
            if values.len() != dimension {
                return Err(FieldPathError::KnotDimensionMismatch {
                    index,
                    expected: dimension,
                    got: values.len(),
                });
            }
            if !time.is_finite() || (index > 0 && *time <= knots[index - 1].0) {
                return Err(FieldPathError::NonMonotoneKnots {
                    index,
                    time: *time,
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(FieldPathError::NonFiniteSample(*time));
            }
        }
        let duration = knots.last().unwrap().0;
        let sampler = move |t: f64| -> Vec<f64> {
            let t = t.clamp(0.0, duration);
            // Last segment whose start is <= t.
            let seg = match knots.iter().position(|(kt, _)| *kt > t) {
                Some(i) => i - 1,
                None => knots.len() - 2,
            };
            let (t0, ref a) = knots[seg];
            let (t1, ref b) = knots[seg + 1];
            let u = (t - t0) / (t1 - t0);
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x * (1.0 - u) + y * u)
                .collect()
        };
        Self::from_fn(dimension, duration, sampler)
    }

    /// Number of field components m.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        let values = (self.sampler)(t);
        debug_assert_eq!(values.len(), self.dimension);
        values
    }

    fn checked_sample(&self, t: f64) -> Result<Vec<f64>, FieldPathError> {
        let values = (self.sampler)(t);
        if values.len() != self.dimension {
            return Err(FieldPathError::SampleDimensionMismatch {
                t,
                expected: self.dimension,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldPathError::NonFiniteSample(t));
        }
        Ok(values)
    }
}

impl std::fmt::Debug for FieldPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldPath")
            .field("dimension", &self.dimension)
            .field("duration", &self.duration)
            .finish_non_exhaustive()
    }
}
