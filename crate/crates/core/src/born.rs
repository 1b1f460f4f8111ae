//! The deformed probability rule P = |ψ|²·exp(−2θ·arg ψ) and the
//! phase-amplitude split ψ = R·e^{iS/κ}.
//!
//! arg ψ is made single-valued by 1D unwrapping from an explicit anchor
//! index; every consumer of a phase in this crate goes through
//! [`unwrap_phase`]. Changing the anchor shifts the phase by a global
//! constant 2πn and rescales the intensity by e^{−4πnθ}; normalized local
//! observables are unaffected.

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{PhaseAmplitudeField, ProbabilityField, WaveField};
use crate::params::DeformationParams;

/// Default relative threshold below which an amplitude counts as a node.
pub const DEFAULT_ZERO_EPS: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum BornError {
    #[error("amplitude below zero threshold at index {0}; phase undefined")]
    ZeroAmplitude(usize),
    #[error("anchor index {anchor} out of range for {len} samples")]
    AnchorOutOfRange { anchor: usize, len: usize },
    #[error("anchor index {0} sits on a zero-amplitude node")]
    AnchorOnNode(usize),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

/// Unwrapped phase plus the node mask produced alongside it.
#[derive(Debug, Clone)]
pub struct UnwrappedPhase {
    pub phase: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Unwraps arg ψ from `anchor_index`, failing on the first zero-amplitude
/// node. `φ[anchor]` is the principal argument in (−π, π]; each increment
/// between adjacent samples is the principal-value phase difference.
pub fn unwrap_phase(field: &WaveField, anchor_index: usize) -> Result<Vec<f64>, BornError> {
    let unwrapped = unwrap_phase_masked(field, anchor_index, DEFAULT_ZERO_EPS)?;
    if let Some(k) = unwrapped.mask.iter().position(|&m| m) {
        return Err(BornError::ZeroAmplitude(k));
    }
    Ok(unwrapped.phase)
}

/// Unwraps arg ψ, masking zero-amplitude nodes instead of failing.
/// `zero_eps` is relative to the maximum amplitude of the field. Masked
/// points still receive a phase value (the running continuation through the
/// node) but it carries no meaning there.
pub fn unwrap_phase_masked(
    field: &WaveField,
    anchor_index: usize,
    zero_eps: f64,
) -> Result<UnwrappedPhase, BornError> {
    let samples = field.samples();
    let n = samples.len();
    if anchor_index >= n {
        return Err(BornError::AnchorOutOfRange { anchor: anchor_index, len: n });
    }
    let threshold = zero_eps * field.max_abs();
    let mask: Vec<bool> = samples.iter().map(|s| s.norm() < threshold).collect();
    if mask[anchor_index] {
        return Err(BornError::AnchorOnNode(anchor_index));
    }

    let mut phase = vec![0.0; n];
    phase[anchor_index] = samples[anchor_index].arg();
    // Forward from the anchor.
    for k in anchor_index + 1..n {
        let inc = principal_increment(samples[k - 1], samples[k], mask[k - 1] || mask[k]);
        phase[k] = phase[k - 1] + inc;
    }
    // Backward from the anchor.
    for k in (0..anchor_index).rev() {
        let inc = principal_increment(samples[k + 1], samples[k], mask[k + 1] || mask[k]);
        phase[k] = phase[k + 1] + inc;
    }
    Ok(UnwrappedPhase { phase, mask })
}

fn principal_increment(from: Complex64, to: Complex64, through_node: bool) -> f64 {
    if through_node {
        // Phase continuation through a node is arbitrary; hold it flat so
        // downstream values stay finite.
        0.0
    } else {
        (to * from.conj()).arg()
    }
}

/// The deformed rule P[k] = |ψ[k]|²·exp(−2θ·φ[k]); nodes get P = |ψ|² and a
/// mask flag. For θ = 0 the output is exactly |ψ|².
pub fn deformed_probability(
    field: &WaveField,
    params: &DeformationParams,
    anchor_index: usize,
) -> Result<ProbabilityField, BornError> {
    deformed_probability_eps(field, params, anchor_index, DEFAULT_ZERO_EPS)
}

/// [`deformed_probability`] with an explicit zero threshold.
pub fn deformed_probability_eps(
    field: &WaveField,
    params: &DeformationParams,
    anchor_index: usize,
    zero_eps: f64,
) -> Result<ProbabilityField, BornError> {
    let theta = params.theta();
    if theta == 0.0 {
        // Undeformed Born rule, bit-exact, no phase needed.
        return Ok(ProbabilityField::unmasked(field.abs_squared(), field.x0(), field.dx())?);
    }
    let unwrapped = unwrap_phase_masked(field, anchor_index, zero_eps)?;
    let values: Vec<f64> = field
        .samples()
        .iter()
        .zip(unwrapped.phase.iter().zip(&unwrapped.mask))
        .map(|(s, (&phi, &masked))| {
            let p0 = s.norm_sqr();
            if masked {
                p0
            } else {
                p0 * (-2.0 * theta * phi).exp()
            }
        })
        .collect();
    Ok(ProbabilityField::new(values, unwrapped.mask, field.x0(), field.dx())?)
}

/// Phase-amplitude split: S = re_kappa·(1+θ²)·φ and R = |ψ|·exp(−θφ), so
/// that ψ = R·e^{iS/κ} and R² equals the deformed probability.
pub fn decompose(
    field: &WaveField,
    params: &DeformationParams,
    anchor_index: usize,
) -> Result<PhaseAmplitudeField, BornError> {
    decompose_eps(field, params, anchor_index, DEFAULT_ZERO_EPS)
}

/// [`decompose`] with an explicit zero threshold.
pub fn decompose_eps(
    field: &WaveField,
    params: &DeformationParams,
    anchor_index: usize,
    zero_eps: f64,
) -> Result<PhaseAmplitudeField, BornError> {
    let unwrapped = unwrap_phase_masked(field, anchor_index, zero_eps)?;
    let theta = params.theta();
    let action_scale = params.phase_to_action();
    let mut amplitude = Vec::with_capacity(field.len());
    let mut action = Vec::with_capacity(field.len());
    for (s, (&phi, &masked)) in field
        .samples()
        .iter()
        .zip(unwrapped.phase.iter().zip(&unwrapped.mask))
    {
        let r = if masked || theta == 0.0 {
            s.norm()
        } else {
            s.norm() * (-theta * phi).exp()
        };
        amplitude.push(r);
        action.push(action_scale * phi);
    }
    let bound = std::f64::consts::PI * action_scale * (1.0 + 1e-9);
    Ok(PhaseAmplitudeField::new(
        amplitude,
        action,
        unwrapped.mask,
        field.x0(),
        field.dx(),
        bound,
    )?)
}

/// Inverse of [`decompose`]: ψ[k] = R[k]·exp(i·S[k]/κ) with complex κ.
pub fn recompose(pa: &PhaseAmplitudeField, params: &DeformationParams) -> Result<WaveField, BornError> {
    // i/κ = (θ + i) / (re_kappa·(1 + θ²))
    let scale = Complex64::new(params.theta(), 1.0) / params.phase_to_action();
    let samples: Vec<Complex64> = pa
        .amplitude()
        .iter()
        .zip(pa.action())
        .map(|(&r, &s)| (scale * s).exp() * r)
        .collect();
    Ok(WaveField::new(samples, pa.x0(), pa.dx())?)
}
