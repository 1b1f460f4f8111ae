//! Analytic two-wave-packet model and its closed-form predictions: the
//! undeformed pattern, the first-order deformation correction, the
//! small-imbalance expansion, fringe locations, and the cubic skewness
//! coefficient.

use num_complex::Complex64;
use thiserror::Error;

use crate::field::{FieldError, ProbabilityField, SignedField, WaveField};
use crate::numeric::cubic_interpolate;
use crate::params::DeformationParams;

/// Tolerance on the distance of Δ/2 from an odd multiple of π/2, inside
/// which the closed form's tan pole is masked.
pub const TAN_POLE_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum TwoPathError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("envelope R{0} has a negative entry")]
    NegativeEnvelope(u8),
    #[error("relative phase poorly resolved: |ΔΔ| ≥ π between samples {0} and {1}")]
    UnresolvedPhase(usize, usize),
    #[error("no fringe of any order found in the requested region")]
    NoFringe,
    #[error("degenerate amplitudes: R1 + R2 = 0 at index {0}")]
    Degenerate(usize),
    #[error("region [{0}, {1}] does not overlap the grid")]
    EmptyRegion(f64, f64),
}

/// Real envelopes R₁, R₂ and real actions S₁, S₂ on one grid.
#[derive(Debug, Clone)]
pub struct TwoPacketModel {
    r1: Vec<f64>,
    r2: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    x0: f64,
    dx: f64,
}

impl TwoPacketModel {
    pub fn new(
        r1: Vec<f64>,
        r2: Vec<f64>,
        s1: Vec<f64>,
        s2: Vec<f64>,
        x0: f64,
        dx: f64,
    ) -> Result<Self, TwoPathError> {
        let n = r1.len();
        if r2.len() != n {
            return Err(FieldError::LengthMismatch(n, r2.len()).into());
        }
        if s1.len() != n {
            return Err(FieldError::LengthMismatch(n, s1.len()).into());
        }
        if s2.len() != n {
            return Err(FieldError::LengthMismatch(n, s2.len()).into());
        }
        if n < crate::field::MIN_SAMPLES {
            return Err(FieldError::TooFewSamples(n).into());
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(FieldError::InvalidSpacing(dx).into());
        }
        if r1.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(TwoPathError::NegativeEnvelope(1));
        }
        if r2.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(TwoPathError::NegativeEnvelope(2));
        }
        Ok(Self { r1, r2, s1, s2, x0, dx })
    }

    /// Build from closures of the grid coordinate.
    pub fn from_fns(
        n: usize,
        x0: f64,
        dx: f64,
        r1: impl Fn(f64) -> f64,
        r2: impl Fn(f64) -> f64,
        s1: impl Fn(f64) -> f64,
        s2: impl Fn(f64) -> f64,
    ) -> Result<Self, TwoPathError> {
        let xs: Vec<f64> = (0..n).map(|k| x0 + k as f64 * dx).collect();
        Self::new(
            xs.iter().map(|&x| r1(x)).collect(),
            xs.iter().map(|&x| r2(x)).collect(),
            xs.iter().map(|&x| s1(x)).collect(),
            xs.iter().map(|&x| s2(x)).collect(),
            x0,
            dx,
        )
    }

    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
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

    pub fn r1(&self) -> &[f64] {
        &self.r1
    }

    pub fn r2(&self) -> &[f64] {
        &self.r2
    }

    pub fn s1(&self) -> &[f64] {
        &self.s1
    }

    pub fn s2(&self) -> &[f64] {
        &self.s2
    }

    /// Dimensionless relative phase Δ = (S₁ − S₂)/Re κ per sample. The model
    /// owns its actions; Δ is never re-derived from wrapped phases.
    pub fn delta(&self, params: &DeformationParams) -> Vec<f64> {
        let inv = 1.0 / params.re_kappa();
        self.s1.iter().zip(&self.s2).map(|(a, b)| (a - b) * inv).collect()
    }

    /// Local amplitude imbalance r = (R₁−R₂)/(R₁+R₂) at abscissa x (linear
    /// interpolation between samples). Returns None where R₁+R₂ vanishes.
    pub fn imbalance_at(&self, x: f64) -> Option<f64> {
        let r1 = crate::numeric::lerp_grid(&self.r1, self.x0, self.dx, x);
        let r2 = crate::numeric::lerp_grid(&self.r2, self.x0, self.dx, x);
        let sum = r1 + r2;
        if sum <= 0.0 {
            None
        } else {
            Some((r1 - r2) / sum)
        }
    }
}

/// ψ[k] = R₁·exp(i·S₁/κ) + R₂·exp(i·S₂/κ) with complex κ. The actions are
/// taken as given (already unwrapped); no rewrapping happens here.
pub fn build_field(model: &TwoPacketModel, params: &DeformationParams) -> Result<WaveField, TwoPathError> {
    // i/κ = (θ + i)/(re_kappa (1 + θ²))
    let scale = Complex64::new(params.theta(), 1.0) / params.phase_to_action();
    let samples: Vec<Complex64> = (0..model.len())
        .map(|k| {
            let b1 = (scale * model.s1[k]).exp() * model.r1[k];
            let b2 = (scale * model.s2[k]).exp() * model.r2[k];
            b1 + b2
        })
        .collect();
    Ok(WaveField::new(samples, model.x0, model.dx)?)
}

/// Undeformed two-path pattern P₀ = R₁² + R₂² + 2R₁R₂·cos Δ.
pub fn baseline_p0(model: &TwoPacketModel, params: &DeformationParams) -> Result<ProbabilityField, TwoPathError> {
    let delta = model.delta(params);
    let values: Vec<f64> = (0..model.len())
        .map(|k| {
            let (r1, r2) = (model.r1[k], model.r2[k]);
            (r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * delta[k].cos()).max(0.0)
        })
        .collect();
    Ok(ProbabilityField::unmasked(values, model.x0, model.dx)?)
}

/// The two pieces of the first-order deformation correction and their sum.
#[derive(Debug, Clone)]
pub struct FirstOrderDeltaP {
    pub total: SignedField,
    pub phase_part: SignedField,
    pub linear_part: SignedField,
}

/// First-order correction split into its phase piece −2θ·P₀·arg ψ₀ and the
/// action-linear piece. arg ψ₀ = (S₁+S₂)/(2 Re κ) + arctan(r·tan(Δ/2)) with
/// the principal arctan, the same convention as [`delta_p_closed_form`], so
/// the two agree identically wherever both are defined.
pub fn delta_p_first_order(
    model: &TwoPacketModel,
    params: &DeformationParams,
) -> Result<FirstOrderDeltaP, TwoPathError> {
    let theta = params.theta();
    let a = params.re_kappa();
    let delta = model.delta(params);
    let n = model.len();
    let mut phase = vec![0.0; n];
    let mut linear = vec![0.0; n];
    let mut total = vec![0.0; n];
    let mut mask = vec![false; n];
    for k in 0..n {
        let (r1, r2) = (model.r1[k], model.r2[k]);
        let (s1, s2) = (model.s1[k], model.s2[k]);
        let sum = r1 + r2;
        let d = delta[k];
        if sum <= 0.0 || near_tan_pole(d) {
            mask[k] = true;
            continue;
        }
        let r = (r1 - r2) / sum;
        let p0 = r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * d.cos();
        let arg0 = (s1 + s2) / (2.0 * a) + (r * (0.5 * d).tan()).atan();
        phase[k] = -2.0 * theta * p0 * arg0;
        linear[k] = 2.0 * theta / a * (r1 * r1 * s1 + r2 * r2 * s2 + r1 * r2 * (s1 + s2) * d.cos());
        total[k] = phase[k] + linear[k];
    }
    let make = |values: Vec<f64>| SignedField { values, mask: mask.clone(), x0: model.x0, dx: model.dx };
    Ok(FirstOrderDeltaP {
        total: make(total),
        phase_part: make(phase),
        linear_part: make(linear),
    })
}

fn near_tan_pole(delta: f64) -> bool {
    // Δ/2 within TAN_POLE_TOL of an odd multiple of π/2 ⇔ Δ within
    // 2·TAN_POLE_TOL of an odd multiple of π.
    let reduced = delta.rem_euclid(2.0 * std::f64::consts::PI);
    (reduced - std::f64::consts::PI).abs() < 2.0 * TAN_POLE_TOL
}

/// Closed-form first-order correction
/// δP = θ(R₁²−R₂²)·Δ − 2θ·P₀·arctan(r·tan(Δ/2)), principal arctan.
/// Valid inside bright-fringe windows |σ| < π/2; tan poles (dark fringes)
/// are masked.
pub fn delta_p_closed_form(
    model: &TwoPacketModel,
    params: &DeformationParams,
) -> Result<SignedField, TwoPathError> {
    let theta = params.theta();
    let delta = model.delta(params);
    let n = model.len();
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    for k in 0..n {
        let (r1, r2) = (model.r1[k], model.r2[k]);
        let sum = r1 + r2;
        let d = delta[k];
        if sum <= 0.0 || near_tan_pole(d) {
            mask[k] = true;
            continue;
        }
        let r = (r1 - r2) / sum;
        let p0 = r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * d.cos();
        values[k] = theta * (r1 * r1 - r2 * r2) * d - 2.0 * theta * p0 * (r * (0.5 * d).tan()).atan();
    }
    Ok(SignedField { values, mask, x0: model.x0, dx: model.dx })
}

/// Argument convention of the small-imbalance bracket. The printed form
/// uses Δ/2; series consistency with the cubic coefficient requires Δ.
/// The oracle adjudicates at build time; see `oracle::adjudicate_small_imbalance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImbalanceBracket {
    /// g(Δ) = Δ − sin Δ (the convention the oracle selects).
    FullDelta,
    /// g(Δ) = Δ/2 − sin(Δ/2) (the convention as printed; kept for comparison).
    HalfDelta,
}

/// Small-imbalance expansion δP = 4θ·R₀²·(ε/R₀)·(g − sin g) with
/// R₀ = (R₁+R₂)/2, ε = (R₁−R₂)/2. Returns the field and a flag warning that
/// |ε|/R₀ exceeded 0.2 somewhere.
pub fn delta_p_small_imbalance(
    model: &TwoPacketModel,
    params: &DeformationParams,
    bracket: ImbalanceBracket,
) -> Result<(SignedField, bool), TwoPathError> {
    let theta = params.theta();
    let delta = model.delta(params);
    let n = model.len();
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    let mut warn = false;
    for k in 0..n {
        let r0 = 0.5 * (model.r1[k] + model.r2[k]);
        let eps = 0.5 * (model.r1[k] - model.r2[k]);
        if r0 <= 0.0 {
            mask[k] = true;
            continue;
        }
        if eps.abs() / r0 > 0.2 {
            warn = true;
        }
        let g = match bracket {
            ImbalanceBracket::FullDelta => delta[k],
            ImbalanceBracket::HalfDelta => 0.5 * delta[k],
        };
        values[k] = 4.0 * theta * r0 * eps * (g - g.sin());
    }
    Ok((SignedField { values, mask, x0: model.x0, dx: model.dx }, warn))
}

/// Coefficient of σ³ in δP near a bright fringe:
/// C₃ = (2/3)·θ·R₁R₂·(R₁−R₂)/(R₁+R₂).
pub fn cubic_coefficient(r1: f64, r2: f64, theta: f64) -> Result<f64, TwoPathError> {
    if r1 + r2 <= 0.0 {
        return Err(TwoPathError::Degenerate(0));
    }
    Ok(2.0 / 3.0 * theta * r1 * r2 * (r1 - r2) / (r1 + r2))
}

/// The phase-independent per-fringe offset 2nπ·θ·(R₁²−R₂²) accompanying the
/// cubic term (principal-arctan convention).
pub fn fringe_offset(n: i64, r1: f64, r2: f64, theta: f64) -> f64 {
    2.0 * n as f64 * std::f64::consts::PI * theta * (r1 * r1 - r2 * r2)
}

/// A bright fringe: the order n, the interpolated root of Δ = 2nπ, and the
/// surrounding |σ| < σ_max analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeLocation {
    pub n: i64,
    pub x_center: f64,
    pub window: (f64, f64),
}

/// All bright fringes (roots of Δ(x) − 2nπ) inside `region`, bracketed on
/// the grid and refined by bisection on a local cubic interpolant of Δ to
/// 10⁻¹⁰·dx. Windows span |σ| < σ_max, clipped at the region edges; with
/// σ_max ≤ π they never cross a dark fringe.
pub fn fringe_locations(
    model: &TwoPacketModel,
    params: &DeformationParams,
    region: (f64, f64),
    sigma_max: f64,
) -> Result<Vec<FringeLocation>, TwoPathError> {
    let delta = model.delta(params);
    let (lo, hi) = region;
    let n_samples = model.len();
    let k_lo = ((lo - model.x0) / model.dx).ceil().max(0.0) as usize;
    let k_hi = (((hi - model.x0) / model.dx).floor() as isize).min(n_samples as isize - 1);
    if k_hi < 0 || k_lo as isize >= k_hi {
        return Err(TwoPathError::EmptyRegion(lo, hi));
    }
    let k_hi = k_hi as usize;
    let two_pi = 2.0 * std::f64::consts::PI;

    // Resolution check: the relative phase must advance less than π per step
    // for fringe bracketing to be trustworthy.
    for k in k_lo..k_hi {
        if (delta[k + 1] - delta[k]).abs() >= std::f64::consts::PI {
            return Err(TwoPathError::UnresolvedPhase(k, k + 1));
        }
    }

    let mut fringes = Vec::new();
    for k in k_lo..k_hi {
        let (d0, d1) = (delta[k], delta[k + 1]);
        let n_min = (d0.min(d1) / two_pi).ceil() as i64;
        let n_max = (d0.max(d1) / two_pi).floor() as i64;
        for n in n_min..=n_max {
            let target = two_pi * n as f64;
            if (d0 - target) * (d1 - target) > 0.0 {
                continue;
            }
            if d1 == target && k + 1 < k_hi {
                continue; // the next cell will pick it up at its left edge
            }
            let x_center = refine_root(model, &delta, k, target);
            let half_lo = crossing_toward(model, &delta, x_center, target - sigma_max, lo, false);
            let half_hi = crossing_toward(model, &delta, x_center, target + sigma_max, hi, true);
            let (w_lo, w_hi) = if d1 > d0 {
                (half_lo, half_hi)
            } else {
                // Δ decreasing: σ = Δ − 2nπ decreases with x.
                let a = crossing_toward(model, &delta, x_center, target + sigma_max, lo, false);
                let b = crossing_toward(model, &delta, x_center, target - sigma_max, hi, true);
                (a, b)
            };
            fringes.push(FringeLocation { n, x_center, window: (w_lo, w_hi) });
        }
    }
    if fringes.is_empty() {
        return Err(TwoPathError::NoFringe);
    }
    fringes.sort_by(|a, b| a.x_center.total_cmp(&b.x_center));
    fringes.dedup_by(|a, b| (a.x_center - b.x_center).abs() < 1e-9 * model.dx);
    Ok(fringes)
}

/// Δ evaluated off-grid with a 4-point cubic interpolant.
fn delta_at(model: &TwoPacketModel, delta: &[f64], x: f64) -> f64 {
    let n = delta.len();
    let t = (x - model.x0) / model.dx;
    let i = (t.floor() as isize).clamp(1, n as isize - 3) as usize;
    cubic_interpolate(delta[i - 1], delta[i], delta[i + 1], delta[i + 2], t - i as f64)
}

fn refine_root(model: &TwoPacketModel, delta: &[f64], k: usize, target: f64) -> f64 {
    let mut a = model.x_at(k);
    let mut b = model.x_at(k + 1);
    let mut fa = delta_at(model, delta, a) - target;
    let tol = 1e-10 * model.dx;
    for _ in 0..200 {
        if b - a < tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = delta_at(model, delta, m) - target;
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

/// March outward from `from` until Δ crosses `target`; bisect the crossing.
/// Returns the clipped boundary when no crossing exists before `limit`.
fn crossing_toward(
    model: &TwoPacketModel,
    delta: &[f64],
    from: f64,
    target: f64,
    limit: f64,
    forward: bool,
) -> f64 {
    let step = if forward { model.dx } else { -model.dx };
    let mut x_prev = from;
    let mut f_prev = delta_at(model, delta, x_prev) - target;
    loop {
        let x = x_prev + step;
        let out_of_range = if forward { x >= limit } else { x <= limit };
        if out_of_range {
            let f_lim = delta_at(model, delta, limit) - target;
            if f_prev * f_lim <= 0.0 {
                return bisect_between(model, delta, x_prev, limit, target);
            }
            return limit;
        }
        let f = delta_at(model, delta, x) - target;
        if f_prev * f <= 0.0 {
            return bisect_between(model, delta, x_prev, x, target);
        }
        x_prev = x;
        f_prev = f;
    }
}

fn bisect_between(model: &TwoPacketModel, delta: &[f64], mut a: f64, mut b: f64, target: f64) -> f64 {
    let mut fa = delta_at(model, delta, a) - target;
    let tol = 1e-10 * model.dx;
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = delta_at(model, delta, m) - target;
        if fa * fm <= 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(theta: f64) -> DeformationParams {
        DeformationParams::new(1.0, theta).unwrap()
    }

    fn uniform_model(r1: f64, r2: f64, q: f64, n: usize, x0: f64, dx: f64) -> TwoPacketModel {
        TwoPacketModel::from_fns(n, x0, dx, |_| r1, |_| r2, |x| 0.5 * q * x, |x| -0.5 * q * x)
            .unwrap()
    }

    #[test]
    fn build_field_single_packet() {
        let model =
            TwoPacketModel::from_fns(32, 0.0, 0.1, |_| 1.5, |_| 0.0, |x| 2.0 * x, |_| 0.0).unwrap();
        let f = build_field(&model, &params(0.0)).unwrap();
        for s in f.samples() {
            assert_relative_eq!(s.norm(), 1.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn build_field_constructive_and_destructive() {
        let p = params(0.0);
        let cons =
            TwoPacketModel::from_fns(16, 0.0, 0.1, |_| 1.0, |_| 1.0, |_| 0.0, |_| 0.0).unwrap();
        let f = build_field(&cons, &p).unwrap();
        for s in f.samples() {
            assert_relative_eq!((s - Complex64::new(2.0, 0.0)).norm(), 0.0, epsilon = 1e-14);
        }
        let dest =
            TwoPacketModel::from_fns(16, 0.0, 0.1, |_| 1.0, |_| 1.0, |_| PI, |_| 0.0).unwrap();
        let f = build_field(&dest, &p).unwrap();
        for s in f.samples() {
            assert!(s.norm() < 1e-14);
        }
    }

    #[test]
    fn baseline_p0_scalar_points() {
        let p = params(0.0);
        let cons = uniform_model(1.0, 1.0, 0.0, 16, 0.0, 0.1);
        assert_relative_eq!(baseline_p0(&cons, &p).unwrap().values()[0], 4.0);

        let dark =
            TwoPacketModel::from_fns(16, 0.0, 0.1, |_| 1.0, |_| 1.0, |_| PI, |_| 0.0).unwrap();
        assert!(baseline_p0(&dark, &p).unwrap().values()[0].abs() < 1e-12);

        let m = TwoPacketModel::from_fns(16, 0.0, 0.1, |_| 1.2, |_| 0.8, |_| 0.3, |_| 0.0).unwrap();
        let expect = 2.08 + 1.92 * 0.3f64.cos();
        assert_relative_eq!(baseline_p0(&m, &p).unwrap().values()[0], expect, max_relative = 1e-14);
    }

    #[test]
    fn first_order_trivial_zeros() {
        // S1 = S2 = 0: both pieces vanish.
        let p = params(0.07);
        let m = uniform_model(1.3, 0.6, 0.0, 16, 0.0, 0.1);
        let parts = delta_p_first_order(&m, &p).unwrap();
        for &v in &parts.total.values {
            assert!(v.abs() < 1e-14);
        }
        // r = 0 with antisymmetric actions: total vanishes.
        let m = TwoPacketModel::from_fns(32, 0.0, 0.05, |_| 1.0, |_| 1.0, |x| 0.4 * x, |x| -0.4 * x)
            .unwrap();
        let parts = delta_p_first_order(&m, &p).unwrap();
        for &v in &parts.total.values {
            assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn first_order_matches_closed_form() {
        // Algebraic identity on a random-ish model with asymmetric gauge.
        let p = params(0.05);
        let m = TwoPacketModel::from_fns(
            256,
            -2.0,
            0.02,
            |x| 1.2 + 0.1 * (0.7 * x).sin().powi(2),
            |x| 0.8 + 0.05 * (1.3 * x).cos().powi(2),
            |x| 2.0 * x + 0.3 * x * x,
            |x| -1.0 * x,
        )
        .unwrap();
        let parts = delta_p_first_order(&m, &p).unwrap();
        let closed = delta_p_closed_form(&m, &p).unwrap();
        let scale = closed.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for k in 0..m.len() {
            if parts.total.mask[k] || closed.mask[k] {
                continue;
            }
            assert_relative_eq!(parts.total.values[k], closed.values[k], epsilon = 1e-12 * scale);
        }
    }

    #[test]
    fn closed_form_trivial_zeros() {
        let p = params(0.09);
        // Δ = 0 everywhere.
        let m = uniform_model(1.4, 0.7, 0.0, 16, 0.0, 0.1);
        for &v in &delta_p_closed_form(&m, &p).unwrap().values {
            assert!(v.abs() < 1e-15);
        }
        // R1 = R2: vanishes identically.
        let m = uniform_model(1.0, 1.0, 1.7, 64, -3.0, 0.1);
        for &v in &delta_p_closed_form(&m, &p).unwrap().values {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_masks_dark_fringes() {
        let m = uniform_model(1.2, 0.8, 1.0, 128, 0.0, 0.05);
        let closed = delta_p_closed_form(&m, &params(0.05)).unwrap();
        // Δ = πx crosses π at... Δ = x here (q = 1), pole at x = π ± tol.
        // Grid points are not exactly at π so nothing masks; force a pole.
        assert!(closed.mask.iter().all(|&m| !m));
        let m = TwoPacketModel::from_fns(16, 0.0, 0.1, |_| 1.2, |_| 0.8, |_| PI, |_| 0.0).unwrap();
        let closed = delta_p_closed_form(&m, &params(0.05)).unwrap();
        assert!(closed.mask.iter().all(|&m| m));
    }

    #[test]
    fn cubic_coefficient_values() {
        assert_relative_eq!(cubic_coefficient(1.0, 1.0, 0.3).unwrap(), 0.0);
        assert_relative_eq!(
            cubic_coefficient(2.0, 1.0, 0.1).unwrap(),
            2.0 / 3.0 * 0.1 * 2.0 / 3.0,
            max_relative = 1e-15
        );
        // Odd under swap.
        assert_relative_eq!(
            cubic_coefficient(1.3, 0.4, 0.2).unwrap(),
            -cubic_coefficient(0.4, 1.3, 0.2).unwrap(),
            max_relative = 1e-15
        );
        assert!(cubic_coefficient(0.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn small_imbalance_zero_for_balanced() {
        let m = uniform_model(1.0, 1.0, 1.0, 64, 0.0, 0.1);
        let (f, warn) = delta_p_small_imbalance(&m, &params(0.05), ImbalanceBracket::FullDelta).unwrap();
        assert!(!warn);
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_imbalance_warns_on_large_eps() {
        let m = uniform_model(1.5, 0.5, 1.0, 64, 0.0, 0.1);
        let (_, warn) = delta_p_small_imbalance(&m, &params(0.05), ImbalanceBracket::FullDelta).unwrap();
        assert!(warn);
    }

    #[test]
    fn fringe_locations_linear_delta() {
        // Δ = qx → centers at 2nπ/q exactly.
        let q = 1.3;
        let m = uniform_model(1.1, 0.9, q, 4096, -20.0, 40.0 / 4096.0);
        let fringes = fringe_locations(&m, &params(0.0), (-19.0, 19.0), PI / 2.0).unwrap();
        assert!(fringes.len() >= 5);
        for f in &fringes {
            assert_relative_eq!(f.x_center, 2.0 * PI * f.n as f64 / q, epsilon = 1e-9);
            assert!(f.window.0 < f.x_center && f.x_center < f.window.1);
        }
    }

    #[test]
    fn fringe_locations_shift_by_2pi() {
        let q = 1.0;
        let n = 2048;
        let dx = 30.0 / n as f64;
        let m1 = uniform_model(1.1, 0.9, q, n, -15.0, dx);
        let m2 = TwoPacketModel::from_fns(
            n,
            -15.0,
            dx,
            |_| 1.1,
            |_| 0.9,
            |x| 0.5 * q * x + 2.0 * PI,
            |x| -0.5 * q * x,
        )
        .unwrap();
        let p = params(0.0);
        let f1 = fringe_locations(&m1, &p, (-14.0, 14.0), 1.0).unwrap();
        let f2 = fringe_locations(&m2, &p, (-14.0, 14.0), 1.0).unwrap();
        // Same centers with n shifted by 1.
        let c1: Vec<(i64, f64)> = f1.iter().map(|f| (f.n, f.x_center)).collect();
        for (n2, x2) in f2.iter().map(|f| (f.n, f.x_center)) {
            let matching = c1.iter().find(|(_, x1)| (x1 - x2).abs() < 1e-8);
            let (n1, _) = matching.expect("matching center");
            assert_eq!(n2, n1 + 1);
        }
    }

    #[test]
    fn fringe_locations_quadratic_delta_vs_refined_argmax() {
        // Quadratic Δ(x): centers match brute-force argmax of P₀ on a 100x
        // refined grid within 1e-6·dx.
        let n = 4096;
        let dx = 20.0 / n as f64;
        let s1 = |x: f64| 0.5 * (1.5 * x + 0.05 * x * x);
        let s2 = |x: f64| -0.5 * (1.5 * x + 0.05 * x * x);
        let m = TwoPacketModel::from_fns(n, -10.0, dx, |_| 1.2, |_| 0.8, s1, s2).unwrap();
        let p = params(0.0);
        let fringes = fringe_locations(&m, &p, (-9.0, 9.0), 1.0).unwrap();
        assert!(!fringes.is_empty());
        for f in &fringes {
            // Refined-grid argmax oracle around the claimed center.
            let fine = 100;
            let mut best = (f64::MIN, f.x_center);
            for j in -200..=200i64 {
                let x = f.x_center + j as f64 * dx / fine as f64;
                let d = s1(x) - s2(x);
                let val = 1.2f64.powi(2) + 0.8f64.powi(2) + 2.0 * 1.2 * 0.8 * d.cos();
                if val > best.0 {
                    best = (val, x);
                }
            }
            // argmax on the refined lattice is within half a fine step; the
            // root itself must sit within 1e-6·dx of the continuum center.
            assert!((best.1 - f.x_center).abs() <= 0.5 * dx / fine as f64 + 1e-6 * dx);
        }
    }

    #[test]
    fn no_fringe_in_region() {
        let m = uniform_model(1.0, 0.9, 0.01, 64, 0.0, 0.1);
        // Δ spans only [0, 0.064]; no root of Δ = 2nπ with n ≠ 0 and the
        // n = 0 root sits at the region edge x = 0... use a region away from it.
        let err = fringe_locations(&m, &params(0.0), (1.0, 6.0), 1.0).unwrap_err();
        assert_eq!(err, TwoPathError::NoFringe);
    }
}
