//! Gridded field types: complex wave fields, phase-amplitude splits, and
//! real intensity fields, all on a uniform 1D grid.

use num_complex::Complex64;
use thiserror::Error;

pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("field needs at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("negative amplitude {value} at index {index}")]
    NegativeAmplitude { index: usize, value: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("action jump {jump} at index {index} exceeds unwrap bound {bound}")]
    ActionJump { index: usize, jump: f64, bound: f64 },
}

fn check_grid(len: usize, x0: f64, dx: f64) -> Result<(), FieldError> {
    if len < MIN_SAMPLES {
        return Err(FieldError::TooFewSamples(len));
    }
    if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
        return Err(FieldError::InvalidSpacing(dx));
    }
    Ok(())
}

/// A complex amplitude sampled on a uniform grid; sample k sits at
/// x0 + k·dx exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    samples: Vec<Complex64>,
    x0: f64,
    dx: f64,
}

impl WaveField {
    pub fn new(samples: Vec<Complex64>, x0: f64, dx: f64) -> Result<Self, FieldError> {
        check_grid(samples.len(), x0, dx)?;
        if let Some(i) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(FieldError::NonFinite(i));
        }
        Ok(Self { samples, x0, dx })
    }

    /// Build from a function of the grid coordinate.
    pub fn from_fn(
        n: usize,
        x0: f64,
        dx: f64,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, FieldError> {
        let samples = (0..n).map(|k| f(x0 + k as f64 * dx)).collect();
        Self::new(samples, x0, dx)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_at(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.x_at(k))
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Born-rule intensity |ψ|² per sample.
    pub fn abs_squared(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_sqr()).collect()
    }
}

/// Real amplitude R ≥ 0 and unwrapped action S on the same grid as the
/// wave field they came from. Masked nodes mark points where the phase was
/// numerically undefined (|ψ| below the zero threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAmplitudeField {
    amplitude: Vec<f64>,
    action: Vec<f64>,
    mask: Vec<bool>,
    x0: f64,
    dx: f64,
}

impl PhaseAmplitudeField {
    /// `unwrap_bound` is the largest admissible action step between adjacent
    /// samples, π·re_kappa·(1+θ²) for a resolved field.
    pub fn new(
        amplitude: Vec<f64>,
        action: Vec<f64>,
        mask: Vec<bool>,
        x0: f64,
        dx: f64,
        unwrap_bound: f64,
    ) -> Result<Self, FieldError> {
        check_grid(amplitude.len(), x0, dx)?;
        if amplitude.len() != action.len() {
            return Err(FieldError::LengthMismatch(amplitude.len(), action.len()));
        }
        if amplitude.len() != mask.len() {
            return Err(FieldError::LengthMismatch(amplitude.len(), mask.len()));
        }
        for (i, (&a, &s)) in amplitude.iter().zip(&action).enumerate() {
            if !a.is_finite() || !s.is_finite() {
                return Err(FieldError::NonFinite(i));
            }
            if a < 0.0 {
                return Err(FieldError::NegativeAmplitude { index: i, value: a });
            }
        }
        for i in 1..action.len() {
            if mask[i] || mask[i - 1] {
                continue;
            }
            let jump = (action[i] - action[i - 1]).abs();
            if jump >= unwrap_bound {
                return Err(FieldError::ActionJump { index: i, jump, bound: unwrap_bound });
            }
        }
        Ok(Self { amplitude, action, mask, x0, dx })
    }

    pub fn amplitude(&self) -> &[f64] {
        &self.amplitude
    }

    pub fn action(&self) -> &[f64] {
        &self.action
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }
}

/// Nonnegative intensity on a grid, with a mask for nodes where the
/// deformed rule fell back to |ψ|² because the phase was undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    values: Vec<f64>,
    mask: Vec<bool>,
    x0: f64,
    dx: f64,
}

impl ProbabilityField {
    pub fn new(values: Vec<f64>, mask: Vec<bool>, x0: f64, dx: f64) -> Result<Self, FieldError> {
        check_grid(values.len(), x0, dx)?;
        if values.len() != mask.len() {
            return Err(FieldError::LengthMismatch(values.len(), mask.len()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(FieldError::NonFinite(i));
            }
            if v < 0.0 {
                return Err(FieldError::NegativeAmplitude { index: i, value: v });
            }
        }
        Ok(Self { values, mask, x0, dx })
    }

    pub fn unmasked(values: Vec<f64>, x0: f64, dx: f64) -> Result<Self, FieldError> {
        let mask = vec![false; values.len()];
        Self::new(values, mask, x0, dx)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x_at(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    /// Rescale all values by a positive constant (used by invariance tests
    /// and by shot-count normalization).
    pub fn scaled(&self, c: f64) -> ProbabilityField {
        assert!(c > 0.0);
        ProbabilityField {
            values: self.values.iter().map(|v| v * c).collect(),
            mask: self.mask.clone(),
            x0: self.x0,
            dx: self.dx,
        }
    }

    /// Same values on a rigidly shifted grid.
    pub fn translated(&self, shift: f64) -> ProbabilityField {
        ProbabilityField {
            values: self.values.clone(),
            mask: self.mask.clone(),
            x0: self.x0 + shift,
            dx: self.dx,
        }
    }

    /// Mirror image about the grid midpoint.
    pub fn mirrored(&self) -> ProbabilityField {
        let mut values = self.values.clone();
        let mut mask = self.mask.clone();
        values.reverse();
        mask.reverse();
        ProbabilityField { values, mask, x0: self.x0, dx: self.dx }
    }
}

/// A signed correction field (same grid contract as ProbabilityField but
/// without the positivity requirement), with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedField {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub x0: f64,
    pub dx: f64,
}

impl SignedField {
    pub fn x_at(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }
}
