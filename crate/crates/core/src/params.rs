//! Deformation parameters: the real phase-action scale and the dimensionless
//! deformation strength.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("re_kappa must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("|theta| must be < 1 (perturbative regime), got {0}")]
    ThetaOutOfRange(f64),
}

/// The phase-action scale Re κ together with the deformation strength
/// θ = Im κ / Re κ. The complex scale κ = re_kappa · (1 + iθ) is derived,
/// never stored, so it is reproducible bit-exactly from the two fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformationParams {
    re_kappa: f64,
    theta: f64,
}

impl DeformationParams {
    pub fn new(re_kappa: f64, theta: f64) -> Result<Self, ParamsError> {
        if !(re_kappa > 0.0) || !re_kappa.is_finite() {
            return Err(ParamsError::InvalidScale(re_kappa));
        }
        if !(theta.abs() < 1.0) {
            return Err(ParamsError::ThetaOutOfRange(theta));
        }
        Ok(Self { re_kappa, theta })
    }

    /// Undeformed parameters at the given scale.
    pub fn undeformed(re_kappa: f64) -> Self {
        Self::new(re_kappa, 0.0).expect("positive scale")
    }

    pub fn re_kappa(&self) -> f64 {
        self.re_kappa
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn im_kappa(&self) -> f64 {
        self.re_kappa * self.theta
    }

    pub fn kappa(&self) -> Complex64 {
        Complex64::new(self.re_kappa, self.re_kappa * self.theta)
    }

    /// |κ|² / Re κ = Re κ · (1 + θ²); the factor converting unwrapped phase
    /// to action in the phase-amplitude split.
    pub fn phase_to_action(&self) -> f64 {
        self.re_kappa * (1.0 + self.theta * self.theta)
    }

    /// Same parameters with θ replaced (used by oracles that antisymmetrize
    /// in θ).
    pub fn with_theta(&self, theta: f64) -> Result<Self, ParamsError> {
        Self::new(self.re_kappa, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(DeformationParams::new(0.0, 0.1).is_err());
        assert!(DeformationParams::new(-1.0, 0.1).is_err());
        assert!(DeformationParams::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn rejects_large_theta() {
        assert!(DeformationParams::new(1.0, 1.0).is_err());
        assert!(DeformationParams::new(1.0, -1.5).is_err());
        assert!(DeformationParams::new(1.0, f64::NAN).is_err());
        assert!(DeformationParams::new(1.0, 0.999).is_ok());
    }

    #[test]
    fn kappa_is_reproducible_from_fields() {
        let p = DeformationParams::new(0.3, 0.07).unwrap();
        let k = p.kappa();
        assert_eq!(k.re, 0.3);
        assert_eq!(k.im, 0.3 * 0.07);
        let p2 = DeformationParams::new(p.re_kappa(), p.theta()).unwrap();
        assert_eq!(p2.kappa(), k);
    }
}
