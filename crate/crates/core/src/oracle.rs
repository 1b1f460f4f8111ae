//! Independent high-precision references. Everything here is deliberately
//! scalar, slow, and formula-independent from the main implementations it
//! checks: the exact deformed two-point intensity is built from first
//! principles with its own phase tracking, series coefficients come from
//! least-squares stencils with step-halving error estimates, and moments use
//! Gauss–Legendre quadrature instead of the trapezoid rule.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::numeric::{gauss_legendre, CompensatedSum};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle input: {0}")]
    InvalidInput(&'static str),
    #[error("phase tracking crossed a near-node of the superposition (|psi| = {0:.3e})")]
    NodeOnPath(f64),
    #[error("step-halving sequence failed to converge for coefficient c{0} (error {1:.3e}, value {2:.3e})")]
    PrecisionLoss(usize, f64, f64),
    #[error("neither bracket convention scales quadratically in the imbalance")]
    Inconclusive,
}

/// Exact deformed intensity of the scalar two-point superposition, in the
/// symmetric gauge S₁ = −S₂ = Δ·Re κ/2:
///   ψ(Δ) = R₁ e^{(θ+i)Δ′/2} + R₂ e^{−(θ+i)Δ′/2},  Δ′ = Δ/(1+θ²),
///   P = |ψ|² e^{−2θφ},
/// with φ the phase tracked continuously from Δ = 0 (where φ = 0), minus nπ
/// near the n-th bright fringe — the branch convention under which the
/// fringe offset reads 2nπθ(R₁²−R₂²).
pub fn exact_intensity_si(
    r1: f64,
    r2: f64,
    theta: f64,
    n_fringe: i64,
    sigma: f64,
) -> Result<f64, OracleError> {
    if !(r1 + r2 > 0.0) || r1 < 0.0 || r2 < 0.0 {
        return Err(OracleError::InvalidInput("amplitudes must be nonnegative with R1+R2 > 0"));
    }
    let delta = 2.0 * std::f64::consts::PI * n_fringe as f64 + sigma;
    let scale = 1.0 / (1.0 + theta * theta);
    let psi = |d: f64| {
        let w = num_complex::Complex64::new(theta, 1.0) * (d * scale / 2.0);
        r1 * w.exp() + r2 * (-w).exp()
    };

    // Continuous phase: walk Δ from 0 in short steps, accumulate principal
    // increments, then snap to principal-plus-winding at the endpoint.
    let steps = ((delta.abs() / 0.02).ceil() as usize).max(1);
    let floor = 1e-9 * (r1 + r2);
    let mut prev = psi(0.0);
    let mut phase = CompensatedSum::new();
    phase.add(prev.arg());
    for s in 1..=steps {
        let cur = psi(delta * s as f64 / steps as f64);
        let inc = (cur / prev).arg();
        // A near-π jump over a 0.02-sized step means the track crossed (or
        // grazed) a node, where the winding becomes ambiguous.
        if cur.norm() < floor || inc.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(OracleError::NodeOnPath(cur.norm()));
        }
        phase.add(inc);
        prev = cur;
    }
    let principal = prev.arg();
    let winding = ((phase.value() - principal) / (2.0 * std::f64::consts::PI)).round();
    let phi = principal + 2.0 * std::f64::consts::PI * winding
        - std::f64::consts::PI * n_fringe as f64;
    Ok(prev.norm_sqr() * (-2.0 * theta * phi).exp())
}

/// Which function of σ is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    /// δP(σ) = P(θ, σ) − P(0, σ): the full deformation, all orders in θ.
    Full,
    /// [P(θ, σ) − P(−θ, σ)]/2: the θ-odd part, which isolates the
    /// first-order structure (c₁ = c₂ = 0 exactly) from O(θ²) contamination.
    ThetaOdd,
}

/// Coefficients of the σ-expansion around the n-th bright fringe, with
/// step-halving error estimates per coefficient.
#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub coefficients: [f64; 6],
    pub errors: [f64; 6],
}

impl SeriesResult {
    /// A coefficient is trustworthy if its halving error is below 10⁻⁴ of
    /// its magnitude, or the coefficient itself is negligible. (Measured
    /// halving errors sit near 10⁻⁶ relative; the gate leaves margin while
    /// staying far below every downstream tolerance.)
    pub fn accepted(&self, k: usize) -> bool {
        self.errors[k] < 1e-4 * self.coefficients[k].abs() || self.coefficients[k].abs() < 1e-10
    }
}

/// Expand the exact deformed intensity minus the reference in σ around
/// Δ = 2nπ: least-squares fit of degree 5 on a 13-point stencil at spacing
/// h, repeated at h/2; the finer fit is returned, the difference is the
/// error estimate.
pub fn series_delta_p(
    r1: f64,
    r2: f64,
    theta: f64,
    n_fringe: i64,
) -> Result<SeriesResult, OracleError> {
    series_delta_p_mode(r1, r2, theta, n_fringe, SeriesMode::Full)
}

pub fn series_delta_p_mode(
    r1: f64,
    r2: f64,
    theta: f64,
    n_fringe: i64,
    mode: SeriesMode,
) -> Result<SeriesResult, OracleError> {
    let delta_p = |sigma: f64| -> Result<f64, OracleError> {
        match mode {
            SeriesMode::Full => {
                let p = exact_intensity_si(r1, r2, theta, n_fringe, sigma)?;
                let p0 = r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * sigma.cos();
                Ok(p - p0)
            }
            SeriesMode::ThetaOdd => {
                let p_plus = exact_intensity_si(r1, r2, theta, n_fringe, sigma)?;
                let p_minus = exact_intensity_si(r1, r2, -theta, n_fringe, sigma)?;
                Ok(0.5 * (p_plus - p_minus))
            }
        }
    };

    let coarse = fit_stencil(&delta_p, 0.04)?;
    let fine = fit_stencil(&delta_p, 0.02)?;
    let mut errors = [0.0; 6];
    for k in 0..6 {
        errors[k] = (coarse[k] - fine[k]).abs();
    }
    Ok(SeriesResult { coefficients: fine, errors })
}

fn fit_stencil(
    f: &dyn Fn(f64) -> Result<f64, OracleError>,
    h: f64,
) -> Result<[f64; 6], OracleError> {
    const M: i64 = 6; // 13 samples, 6 unknowns
    let u_max = M as f64 * h;
    let rows = (2 * M + 1) as usize;
    let mut design = DMatrix::zeros(rows, 6);
    let mut rhs = DVector::zeros(rows);
    for (row, j) in (-M..=M).enumerate() {
        let sigma = j as f64 * h;
        let u = sigma / u_max; // conditioning: basis on [−1, 1]
        let mut p = 1.0;
        for col in 0..6 {
            design[(row, col)] = p;
            p *= u;
        }
        rhs[row] = f(sigma)?;
    }
    let svd = design.svd(true, true);
    let sol = svd.solve(&rhs, 0.0).map_err(|_| OracleError::Inconclusive)?;
    let mut out = [0.0; 6];
    for k in 0..6 {
        out[k] = sol[k] / u_max.powi(k as i32);
    }
    Ok(out)
}

/// First-order closed form, written independently from the main library:
/// δP = θ(R₁²−R₂²)Δ − 2θP₀·[arctan(r·tan(Δ/2)) tracked continuously in Δ].
fn closed_form_reference(r1: f64, r2: f64, theta: f64, delta: f64) -> f64 {
    let p0 = r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * delta.cos();
    let r = (r1 - r2) / (r1 + r2);
    // Continuous branch of u ↦ arctan(r·tan(u)) at u = Δ/2: the function
    // gains π·sign(r) per π-period of u, so shift the principal value by
    // round(u/π)·π·sign(r).
    let u = delta / 2.0;
    let k = (u / std::f64::consts::PI).round();
    let principal = (r * (u - k * std::f64::consts::PI).tan()).atan();
    let tracked = if r == 0.0 { 0.0 } else { principal + k * std::f64::consts::PI * r.signum() };
    theta * (r1 * r1 - r2 * r2) * delta - 2.0 * theta * p0 * tracked
}

/// Candidate small-imbalance brackets: the argument of the sine (and the
/// linear slot) is either the full relative phase Δ or the half-phase Δ/2
/// as printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketCandidate {
    FullDelta,
    HalfDelta,
}

fn small_imbalance_candidate(
    candidate: BracketCandidate,
    r0: f64,
    eps: f64,
    theta: f64,
    delta: f64,
) -> f64 {
    let arg = match candidate {
        BracketCandidate::FullDelta => delta,
        BracketCandidate::HalfDelta => delta / 2.0,
    };
    4.0 * theta * r0 * eps * (arg - arg.sin())
}

#[derive(Debug, Clone)]
pub struct ConventionReport {
    pub chosen: BracketCandidate,
    /// Max-error ratio when ε halves, per candidate (FullDelta, HalfDelta).
    pub halving_ratios: (f64, f64),
    /// Max absolute mismatch vs the closed form at ε = 0.05, per candidate.
    pub mismatch: (f64, f64),
    /// Cubic coefficient from the chosen bracket's Taylor limit, divided by
    /// the cubic law (2θ/3)R₁R₂(R₁−R₂)/(R₁+R₂); 1 means consistent.
    pub cubic_prefactor: f64,
}

/// Decide which bracket argument makes the compact small-imbalance expansion
/// Taylor-consistent with the closed form: evaluate both candidates over
/// Δ ∈ [−π/2, π/2] at ε = 0.05 and ε = 0.025 (R₀ = 1, θ = 0.01); the valid
/// convention's max error shrinks at least quadratically when ε halves.
pub fn adjudicate_small_imbalance() -> Result<ConventionReport, OracleError> {
    let (r0, theta) = (1.0, 0.01);
    let max_err = |candidate: BracketCandidate, eps: f64| -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=200 {
            let delta = -std::f64::consts::FRAC_PI_2
                + std::f64::consts::PI * i as f64 / 200.0;
            let exact = closed_form_reference(r0 + eps, r0 - eps, theta, delta);
            let approx = small_imbalance_candidate(candidate, r0, eps, theta, delta);
            worst = worst.max((exact - approx).abs());
        }
        worst
    };
    let full_1 = max_err(BracketCandidate::FullDelta, 0.05);
    let full_2 = max_err(BracketCandidate::FullDelta, 0.025);
    let half_1 = max_err(BracketCandidate::HalfDelta, 0.05);
    let half_2 = max_err(BracketCandidate::HalfDelta, 0.025);
    let ratio_full = full_1 / full_2.max(f64::MIN_POSITIVE);
    let ratio_half = half_1 / half_2.max(f64::MIN_POSITIVE);

    let quadratic = |ratio: f64| ratio >= 3.5;
    let chosen = match (quadratic(ratio_full), quadratic(ratio_half)) {
        (true, false) => BracketCandidate::FullDelta,
        (false, true) => BracketCandidate::HalfDelta,
        _ => return Err(OracleError::Inconclusive),
    };

    // Taylor limit of the chosen bracket: 4θR₀ε(Δ − sinΔ) → (2/3)θR₀ε·Δ³.
    // Normalize against the cubic law (2/3)θR₁R₂(R₁−R₂)/(R₁+R₂)·Δ³ with
    // R₁,₂ = R₀ ± ε, so a consistent convention reports exactly 1.
    let eps = 1e-3;
    let delta = 1e-2;
    let approx = small_imbalance_candidate(chosen, r0, eps, theta, delta);
    let normalizer = (2.0 / 3.0)
        * theta
        * (r0 + eps)
        * (r0 - eps)
        * (2.0 * eps / (2.0 * r0))
        * delta.powi(3);
    let cubic_prefactor = approx / normalizer;

    Ok(ConventionReport {
        chosen,
        halving_ratios: (ratio_full, ratio_half),
        mismatch: (full_1, half_1),
        cubic_prefactor,
    })
}

/// Gauss–Legendre window moments of a continuous profile: reference values
/// for `analysis::local_moments`, with error estimates from node doubling.
pub struct MomentReference {
    pub mu2: f64,
    pub mu3: f64,
    pub skewness: f64,
    pub error: f64,
}

pub fn refined_grid_moments(
    generator: &dyn Fn(f64) -> f64,
    center: f64,
    window: (f64, f64),
    refinement: usize,
) -> Result<MomentReference, OracleError> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(OracleError::InvalidInput("window must be nonempty"));
    }
    let n = refinement.max(8);
    let eval = |nodes: usize| -> (f64, f64, f64) {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut norm = CompensatedSum::new();
        let mut m2 = CompensatedSum::new();
        let mut m3 = CompensatedSum::new();
        for (x, w) in gauss_legendre(nodes) {
            let xx = mid + half * x;
            let p = generator(xx) * w * half;
            let d = xx - center;
            norm.add(p);
            m2.add(p * d * d);
            m3.add(p * d * d * d);
        }
        let norm = norm.value();
        (m2.value() / norm, m3.value() / norm, norm)
    };
    let (mu2_a, mu3_a, _) = eval(n);
    let (mu2, mu3, _) = eval(2 * n);
    let skew = mu3 / mu2.powf(1.5);
    let skew_a = mu3_a / mu2_a.powf(1.5);
    Ok(MomentReference {
        mu2,
        mu3,
        skewness: skew,
        error: (skew - skew_a).abs().max((mu2 - mu2_a).abs()).max((mu3 - mu3_a).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn exact_intensity_reduces_to_p0_at_theta_zero() {
        for &(r1, r2, n, sigma) in
            &[(1.2, 0.8, 0i64, 0.3), (2.0, 1.0, 1, -0.2), (1.0, 1.0, 0, 0.5)]
        {
            let p = exact_intensity_si(r1, r2, 0.0, n, sigma).unwrap();
            let p0 = r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * sigma.cos();
            assert_relative_eq!(p, p0, max_relative = 1e-12);
        }
    }

    #[test]
    fn series_cubic_coefficient_matches_law() {
        // c₃/θ → (2/3)R₁R₂(R₁−R₂)/(R₁+R₂); R1=2, R2=1 gives 4/9.
        let theta = 0.01;
        let s = series_delta_p(2.0, 1.0, theta, 0).unwrap();
        assert_relative_eq!(s.coefficients[3] / theta, 4.0 / 9.0, max_relative = 5e-3);
        assert!(s.accepted(3), "c3 error estimate too large: {:?}", s.errors[3]);
    }

    #[test]
    fn series_balanced_case_is_even() {
        let s = series_delta_p(1.0, 1.0, 0.05, 0).unwrap();
        assert!(s.coefficients[1].abs() < 1e-10, "c1 = {}", s.coefficients[1]);
        assert!(s.coefficients[3].abs() < 1e-10, "c3 = {}", s.coefficients[3]);
        assert!(s.coefficients[5].abs() < 1e-8, "c5 = {}", s.coefficients[5]);
    }

    #[test]
    fn series_offset_matches_fringe_formula() {
        // c₀ = 2nπθ(R₁²−R₂²) at first order; the θ-odd part carries an
        // O((nπθ)²) relative correction, so stay at small θ and allow it.
        let (r1, r2, theta) = (1.2, 0.8, 0.01);
        for n in [-2i64, 1, 3] {
            let s = series_delta_p_mode(r1, r2, theta, n, SeriesMode::ThetaOdd).unwrap();
            let expected = 2.0 * n as f64 * PI * theta * (r1 * r1 - r2 * r2);
            assert_relative_eq!(s.coefficients[0], expected, max_relative = 1e-2);
        }
    }

    #[test]
    fn theta_odd_part_has_no_linear_or_quadratic_term() {
        let s = series_delta_p_mode(1.2, 0.8, 0.1, 0, SeriesMode::ThetaOdd).unwrap();
        let scale = s.coefficients[3].abs();
        assert!(s.coefficients[1].abs() < 1e-6 * scale.max(1.0), "c1 = {}", s.coefficients[1]);
        assert!(s.coefficients[2].abs() < 1e-6 * scale.max(1.0), "c2 = {}", s.coefficients[2]);
    }

    #[test]
    fn adjudication_picks_full_delta() {
        let report = adjudicate_small_imbalance().unwrap();
        assert_eq!(report.chosen, BracketCandidate::FullDelta);
        assert!(report.halving_ratios.0 >= 3.5);
        assert!(report.halving_ratios.1 < 3.5);
        assert_relative_eq!(report.cubic_prefactor, 1.0, max_relative = 1e-3);
        // rejected bracket is off at O(1) relative scale near Δ = 1
        let exact = closed_form_reference(1.05, 0.95, 0.01, 1.0);
        let rejected = small_imbalance_candidate(BracketCandidate::HalfDelta, 1.0, 0.05, 0.01, 1.0);
        assert!((exact - rejected).abs() > 0.3 * exact.abs());
    }

    #[test]
    fn refined_moments_polynomial_reference() {
        let gen = |x: f64| 1.0 + 0.1 * x * x * x;
        let m = refined_grid_moments(&gen, 0.0, (-1.0, 1.0), 32).unwrap();
        assert_relative_eq!(m.mu2, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(m.mu3, 1.0 / 70.0, max_relative = 1e-12);
        assert_relative_eq!(m.skewness, 3.0f64.powf(1.5) / 70.0, max_relative = 1e-12);
        assert!(m.error < 1e-12);
    }

    #[test]
    fn refined_moments_even_profile() {
        let gen = |x: f64| (1.0 - x * x).max(0.0);
        let m = refined_grid_moments(&gen, 0.0, (-0.9, 0.9), 64).unwrap();
        assert!(m.skewness.abs() < 1e-14);
    }

    #[test]
    fn node_on_path_detected() {
        // Balanced amplitudes put an exact zero at Δ = π on the way to n = 1
        // (only at θ = 0; a finite θ lifts the node).
        match exact_intensity_si(1.0, 1.0, 0.0, 1, 0.0) {
            Err(OracleError::NodeOnPath(_)) => {}
            other => panic!("expected node detection, got {other:?}"),
        }
    }
}
