//! Symmetric experimental-imperfection models: per-shot phase and
//! path-length jitter on the action fields, detector point-spread blur, and
//! multinomial shot sampling. Everything is reproducible from a single seed
//! with per-shot counter-derived streams, so serial and parallel runs agree
//! bit for bit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::born::deformed_probability;
use crate::field::{FieldError, ProbabilityField};
use crate::numeric::lerp_grid;
use crate::params::DeformationParams;
use crate::twopath::{build_field, TwoPacketModel, TwoPathError};

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("invalid noise configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("distribution carries no probability mass")]
    EmptyDistribution,
    #[error(transparent)]
    TwoPath(#[from] TwoPathError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Born(#[from] crate::born::BornError),
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct NoiseConfig {
    /// Std-dev of the per-shot global phase (radians), added to both actions
    /// equally; it never moves Δ and acts as a sanity anchor.
    pub phase_jitter_sigma: f64,
    /// Std-dev of the per-shot path-length fluctuation (length units),
    /// applied as a rigid translation of S₁ only.
    pub path_jitter_sigma: f64,
    /// Detector blur width (length units); 6σ-truncated Gaussian kernel.
    pub psf_sigma: f64,
    pub shots: u64,
    pub events_per_shot: u64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            phase_jitter_sigma: 0.0,
            path_jitter_sigma: 0.0,
            psf_sigma: 0.0,
            shots: 1,
            events_per_shot: 0,
            seed,
        }
    }

    fn validate(&self) -> Result<(), NoiseError> {
        if self.phase_jitter_sigma < 0.0 || self.path_jitter_sigma < 0.0 || self.psf_sigma < 0.0 {
            return Err(NoiseError::InvalidConfig("jitter sigmas must be >= 0"));
        }
        if self.shots == 0 {
            return Err(NoiseError::InvalidConfig("shots must be >= 1"));
        }
        Ok(())
    }
}

/// Per-shot RNG stream: one base seed, stream index = shot counter, so shot
/// k draws the same numbers regardless of how shots are scheduled.
pub fn shot_rng(seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot_index);
    rng
}

/// Deformed pattern for a single noise realization (no PSF, no sampling).
/// `anchor` fixes the unwrap anchor so every shot lands on the same phase
/// branch; callers should pass the argmax of the noiseless pattern.
pub fn shot_pattern(
    model: &TwoPacketModel,
    params: &DeformationParams,
    cfg: &NoiseConfig,
    shot_index: u64,
    anchor: usize,
) -> Result<ProbabilityField, NoiseError> {
    let mut rng = shot_rng(cfg.seed, shot_index);
    let phase_draw = Normal::new(0.0, cfg.phase_jitter_sigma.max(f64::MIN_POSITIVE))
        .map_err(|_| NoiseError::InvalidConfig("bad phase jitter sigma"))?;
    let path_draw = Normal::new(0.0, cfg.path_jitter_sigma.max(f64::MIN_POSITIVE))
        .map_err(|_| NoiseError::InvalidConfig("bad path jitter sigma"))?;
    // Draw both every shot so the stream layout does not depend on which
    // sigmas are zero.
    let eta: f64 = phase_draw.sample(&mut rng);
    let xi: f64 = path_draw.sample(&mut rng);
    let eta = if cfg.phase_jitter_sigma == 0.0 { 0.0 } else { eta };
    let xi = if cfg.path_jitter_sigma == 0.0 { 0.0 } else { xi };

    let jittered = jittered_model(model, params, eta, xi)?;
    let field = build_field(&jittered, params)?;
    Ok(deformed_probability(&field, params, anchor)?)
}

/// Apply the per-shot draws: a global phase η (radians) enters both actions
/// as η·(phase-to-action scale); the path fluctuation ξ rigidly translates
/// S₁ (linear interpolation inside the grid, linear extrapolation at the
/// edges, which is exact for the polynomial actions used in practice).
fn jittered_model(
    model: &TwoPacketModel,
    params: &DeformationParams,
    eta: f64,
    xi: f64,
) -> Result<TwoPacketModel, NoiseError> {
    let phase_shift = eta * params.phase_to_action();
    let n = model.len();
    let s1_src = model.s1();
    let s1: Vec<f64> = (0..n)
        .map(|k| lerp_grid(s1_src, model.x0(), model.dx(), model.x_at(k) - xi) + phase_shift)
        .collect();
    let s2: Vec<f64> = model.s2().iter().map(|s| s + phase_shift).collect();
    Ok(TwoPacketModel::new(
        model.r1().to_vec(),
        model.r2().to_vec(),
        s1,
        s2,
        model.x0(),
        model.dx(),
    )?)
}

/// Average the deformed pattern over `cfg.shots` independent realizations,
/// then blur with the detector PSF. Shots are processed in fixed-size chunks
/// summed in index order, so the result is independent of thread count.
pub fn ensemble_pattern(
    model: &TwoPacketModel,
    params: &DeformationParams,
    cfg: &NoiseConfig,
) -> Result<ProbabilityField, NoiseError> {
    cfg.validate()?;
    let clean_field = build_field(model, params)?;
    let anchor = clean_field
        .samples()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0);

    let n = model.len();
    const CHUNK: u64 = 64;
    let n_chunks = (cfg.shots + CHUNK - 1) / CHUNK;
    let partials: Result<Vec<(Vec<f64>, Vec<bool>)>, NoiseError> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0f64; n];
            let mut mask = vec![false; n];
            let lo = c * CHUNK;
            let hi = ((c + 1) * CHUNK).min(cfg.shots);
            for shot in lo..hi {
                let p = shot_pattern(model, params, cfg, shot, anchor)?;
                for (k, (&v, &m)) in p.values().iter().zip(p.mask()).enumerate() {
                    sum[k] += v;
                    mask[k] |= m;
                }
            }
            Ok((sum, mask))
        })
        .collect();
    let partials = partials?;
    let mut mean = vec![0.0f64; n];
    let mut mask = vec![false; n];
    for (sum, m) in &partials {
        for k in 0..n {
            mean[k] += sum[k];
            mask[k] |= m[k];
        }
    }
    let inv = 1.0 / cfg.shots as f64;
    for v in &mut mean {
        *v *= inv;
    }
    let averaged = ProbabilityField::new(mean, mask, model.x0(), model.dx())?;
    apply_psf(&averaged, cfg.psf_sigma)
}

/// Convolve with a discrete Gaussian kernel of width `sigma`, truncated at
/// 6σ. The kernel is renormalized over the in-range taps at each point, so
/// edges lose no mass to the boundary.
pub fn apply_psf(p: &ProbabilityField, sigma: f64) -> Result<ProbabilityField, NoiseError> {
    if sigma < 0.0 {
        return Err(NoiseError::InvalidConfig("psf sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(p.clone());
    }
    let dx = p.dx();
    let half = ((6.0 * sigma / dx).ceil() as usize).max(1);
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let u = (j as f64 - half as f64) * dx / sigma;
            (-0.5 * u * u).exp()
        })
        .collect();
    let n = p.len();
    let v = p.values();
    let mut out = vec![0.0f64; n];
    for k in 0..n {
        let mut acc = 0.0;
        let mut weight = 0.0;
        for (j, &w) in kernel.iter().enumerate() {
            let idx = k as isize + j as isize - half as isize;
            if idx < 0 || idx >= n as isize {
                continue;
            }
            acc += w * v[idx as usize];
            weight += w;
        }
        out[k] = acc / weight;
    }
    Ok(ProbabilityField::new(out, p.mask().to_vec(), p.x0(), p.dx())?)
}

/// Multinomial draw of `n_events` over bins with probabilities
/// P[k]·dx / Σ P·dx, by the conditional-binomial decomposition. Deterministic
/// under `seed`; counts always sum to `n_events` exactly.
pub fn sample_shots(
    p: &ProbabilityField,
    n_events: u64,
    seed: u64,
) -> Result<Vec<u64>, NoiseError> {
    let total: f64 = p.values().iter().filter(|v| v.is_finite()).sum();
    if !(total > 0.0) {
        return Err(NoiseError::EmptyDistribution);
    }
    if p.values().iter().any(|&v| v < 0.0) {
        return Err(NoiseError::InvalidConfig("probabilities must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; p.len()];
    let mut remaining_events = n_events;
    let mut remaining_mass = total;
    for (k, &v) in p.values().iter().enumerate() {
        if remaining_events == 0 {
            break;
        }
        if remaining_mass <= v || k == p.len() - 1 {
            counts[k] = remaining_events;
            break;
        }
        let prob = (v / remaining_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining_events, prob)
            .map_err(|_| NoiseError::InvalidConfig("binomial probability out of range"))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining_events -= draw;
        remaining_mass -= v;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn linear_delta_model(n: usize, q: f64) -> TwoPacketModel {
        let x0 = -3.0 * PI / q;
        let dx = 6.0 * PI / q / (n - 1) as f64;
        TwoPacketModel::from_fns(n, x0, dx, |_| 1.2, |_| 0.8, |x| q * x, |_| 0.0).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_clean_pattern() {
        let params = DeformationParams::new(1.0, 0.05).unwrap();
        let model = linear_delta_model(2048, 1.0);
        let cfg = NoiseConfig::noiseless(42);
        let noisy = ensemble_pattern(&model, &params, &cfg).unwrap();
        let clean_field = build_field(&model, &params).unwrap();
        let anchor = clean_field
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
            .map(|(i, _)| i)
            .unwrap();
        let clean = deformed_probability(&clean_field, &params, anchor).unwrap();
        for (a, b) in noisy.values().iter().zip(clean.values()) {
            // the ensemble path accumulates its average in a different order
            assert_relative_eq!(*a, *b, max_relative = 1e-12, epsilon = 1e-300);
        }
    }

    #[test]
    fn path_jitter_reduces_visibility_by_gaussian_factor() {
        // Linear Δ = qx, θ = 0: averaging cos(q(x−ξ)) over ξ ~ N(0, σ)
        // multiplies the fringe term by exp(−(qσ)²/2) and moves nothing.
        let q = 2.0;
        let sigma = 0.25;
        let params = DeformationParams::undeformed(1.0);
        let model = linear_delta_model(4096, q);
        let cfg = NoiseConfig {
            path_jitter_sigma: sigma,
            shots: 20_000,
            ..NoiseConfig::noiseless(7)
        };
        let noisy = ensemble_pattern(&model, &params, &cfg).unwrap();
        // visibility from interior extremes (avoid the extrapolated edges)
        let n = noisy.len();
        let core = &noisy.values()[n / 4..3 * n / 4];
        let max = core.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = core.iter().cloned().fold(f64::INFINITY, f64::min);
        let visibility = (max - min) / (max + min);
        let clean_visibility = 2.0 * 1.2 * 0.8 / (1.2f64.powi(2) + 0.8f64.powi(2));
        let expected = clean_visibility * (-(q * sigma).powi(2) / 2.0).exp();
        assert_relative_eq!(visibility, expected, max_relative = 0.02);
    }

    #[test]
    fn global_phase_jitter_leaves_theta0_pattern_unchanged() {
        let params = DeformationParams::undeformed(1.0);
        let model = linear_delta_model(1024, 1.5);
        let cfg = NoiseConfig {
            phase_jitter_sigma: 0.5,
            shots: 50,
            ..NoiseConfig::noiseless(3)
        };
        let noisy = ensemble_pattern(&model, &params, &cfg).unwrap();
        let clean = ensemble_pattern(&model, &params, &NoiseConfig::noiseless(3)).unwrap();
        for (a, b) in noisy.values().iter().zip(clean.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn psf_preserves_parity_and_mass() {
        let n = 2001;
        let dx = 2.0 / (n - 1) as f64;
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let x = -1.0 + k as f64 * dx;
                (-(x * x) / 0.02).exp()
            })
            .collect();
        let p = ProbabilityField::unmasked(values, -1.0, dx).unwrap();
        let blurred = apply_psf(&p, 0.05).unwrap();
        // even in, even out
        for k in 0..n / 2 {
            assert_relative_eq!(blurred.values()[k], blurred.values()[n - 1 - k], max_relative = 1e-12);
        }
        let (_, _, s) = crate::analysis::local_moments(&blurred, 0.0, (-0.8, 0.8)).unwrap();
        assert!(s.abs() < 1e-10, "psf introduced skewness {s}");
    }

    #[test]
    fn sample_shots_closure_and_delta() {
        let mut values = vec![0.0; 100];
        values[37] = 1.0;
        let p = ProbabilityField::unmasked(values, 0.0, 0.1).unwrap();
        let counts = sample_shots(&p, 1000, 5).unwrap();
        assert_eq!(counts[37], 1000);
        assert_eq!(counts.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn sample_shots_uniform_statistics() {
        let p = ProbabilityField::unmasked(vec![1.0; 100], 0.0, 0.1).unwrap();
        let counts = sample_shots(&p, 1_000_000, 11).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 1_000_000);
        let sigma = (1_000_000f64 * 0.01 * 0.99).sqrt();
        for &c in &counts {
            assert!((c as f64 - 10_000.0).abs() < 5.0 * sigma, "bin count {c}");
        }
    }

    #[test]
    fn determinism_across_chunking() {
        let params = DeformationParams::new(1.0, 0.02).unwrap();
        let model = linear_delta_model(512, 1.0);
        let cfg = NoiseConfig {
            phase_jitter_sigma: 0.1,
            path_jitter_sigma: 0.05,
            shots: 130,
            ..NoiseConfig::noiseless(99)
        };
        let a = ensemble_pattern(&model, &params, &cfg).unwrap();
        let b = ensemble_pattern(&model, &params, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        let h1 = sample_shots(&a, 10_000, 123).unwrap();
        let h2 = sample_shots(&b, 10_000, 123).unwrap();
        assert_eq!(h1, h2);
    }
}
