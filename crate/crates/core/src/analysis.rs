//! Fringe analysis: peak detection, windowed central moments, the skewness
//! observable 𝒮 = μ₃/μ₂^{3/2}, local cubic fits, and θ estimation from the
//! 𝒮 = K·θ·r scaling.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::field::ProbabilityField;
use crate::numeric::{lerp_grid, parabolic_vertex, CompensatedSum};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no peaks above the prominence threshold")]
    NoPeaks,
    #[error("moment window [{0}, {1}] carries no probability")]
    EmptyWindow(f64, f64),
    #[error("moment window [{0}, {1}] extends outside the grid")]
    WindowOutOfRange(f64, f64),
    #[error("cubic fit needs at least 12 samples in range, found {0}")]
    TooFewFitSamples(usize),
    #[error("cubic fit design matrix is ill-conditioned (cond = {0:.3e})")]
    IllConditioned(f64),
    #[error("theta fit needs at least one usable record with nonzero imbalance")]
    Underdetermined,
    #[error("all imbalances are zero; the skewness signal vanishes identically")]
    Degenerate,
    #[error("null test needs at least 100 samples, got {0}")]
    TooFewSamples(usize),
}

/// Analysis knobs; the window convention (σ_max, symmetrization) is a choice,
/// so the calibration constant is versioned together with these options.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Fraction of the global maximum a peak's prominence must reach.
    pub min_prominence: f64,
    /// Moment window half-width in local phase units (radians of relative
    /// phase, with one fringe period = 2π); the window is additionally
    /// clipped at the bracketing dark fringes and symmetrized. The local
    /// period is read off the detected peak spacing.
    pub sigma_max: f64,
    /// Cubic-fit half-width, also in local phase units.
    pub fit_halfwidth: f64,
    /// Subtract a linear background through the window endpoints before
    /// taking moments. Off by default: two-packet patterns have structure,
    /// not a pedestal.
    pub remove_linear_background: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            min_prominence: 0.1,
            sigma_max: std::f64::consts::FRAC_PI_2,
            fit_halfwidth: 0.3,
            remove_linear_background: false,
        }
    }
}

/// One analyzed fringe.
#[derive(Debug, Clone)]
pub struct FringeRecord {
    pub x_peak: f64,
    pub window: (f64, f64),
    pub mu2: f64,
    pub mu3: f64,
    pub skewness: f64,
    /// Local fit coefficients (a0, a1, a2, a3) in grid length units of δx.
    pub poly_fit: [f64; 4],
    /// (R1−R2)/(R1+R2) at the peak when the generating model is known.
    pub imbalance_r: Option<f64>,
    pub mask_fraction: f64,
}

impl FringeRecord {
    pub fn usable(&self) -> bool {
        self.mu2 > 0.0 && self.skewness.is_finite() && self.mask_fraction < 0.1
    }
}

#[derive(Debug, Clone)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    pub std_error: f64,
    pub n_fringes: usize,
    /// Mean calibration constant over the records that entered the fit.
    pub calibration_k: f64,
    pub residual_chi2: f64,
}

/// Numerically calibrated proportionality 𝒮/(θ·r), tabulated against r.
/// The constant carries an intrinsic r-dependence of order (1−r²) under the
/// fixed window convention, so a single scalar would bias multi-r fits;
/// interpolation in r keeps per-point errors inside the scaling tolerance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CalibrationTable {
    /// (r, K) pairs sorted by r, strictly increasing.
    pub entries: Vec<(f64, f64)>,
}

impl CalibrationTable {
    pub fn new(mut entries: Vec<(f64, f64)>) -> Self {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { entries }
    }

    /// Linear interpolation in r; clamped extrapolation beyond the table.
    pub fn k_at(&self, r: f64) -> f64 {
        let r = r.abs();
        match self.entries.len() {
            0 => 0.0,
            1 => self.entries[0].1,
            _ => {
                let i = self
                    .entries
                    .windows(2)
                    .position(|w| r <= w[1].0)
                    .unwrap_or(self.entries.len() - 2);
                let (r0, k0) = self.entries[i];
                let (r1, k1) = self.entries[i + 1];
                let t = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
                k0 + t * (k1 - k0)
            }
        }
    }
}

/// Local maxima with prominence ≥ `min_prominence`·max(P). The discrete
/// argmax is refined by a parabola through its three samples; the window
/// spans to the nearest local minimum on each side, then both half-widths
/// are symmetrized to the smaller one so a perfectly even fringe yields
/// exactly 𝒮 = 0 regardless of neighbor asymmetry.
pub fn find_peaks(
    p: &ProbabilityField,
    min_prominence: f64,
) -> Result<Vec<(f64, (f64, f64))>, AnalysisError> {
    let v = p.values();
    let n = v.len();
    let global_max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = min_prominence * global_max;

    let mut out = Vec::new();
    for k in 1..n - 1 {
        if !(v[k] > v[k - 1] && v[k] >= v[k + 1]) {
            continue;
        }
        // Walk outward to the bracketing local minima.
        let mut lo = k;
        while lo > 0 && v[lo - 1] <= v[lo] {
            lo -= 1;
        }
        let mut hi = k;
        while hi + 1 < n && v[hi + 1] <= v[hi] {
            hi += 1;
        }
        let prominence = v[k] - v[lo].max(v[hi]);
        if prominence < threshold {
            continue;
        }
        let offset = parabolic_vertex(v[k - 1], v[k], v[k + 1]).clamp(-0.5, 0.5);
        let x_peak = p.x_at(k) + offset * p.dx();
        let half = (x_peak - p.x_at(lo)).min(p.x_at(hi) - x_peak);
        if half <= p.dx() {
            continue; // too narrow to carry moments
        }
        out.push((x_peak, (x_peak - half, x_peak + half)));
    }
    if out.is_empty() {
        return Err(AnalysisError::NoPeaks);
    }
    Ok(out)
}

/// ∫ over [lo, hi] of f(x)·P(x) dx by the trapezoid rule on the grid knots,
/// with linearly interpolated partial segments at both window edges.
fn window_integral(
    p: &ProbabilityField,
    lo: f64,
    hi: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let dx = p.dx();
    let v = p.values();
    let value_at = |x: f64| lerp_grid(v, p.x0(), dx, x) * f(x);
    let first_knot = ((lo - p.x0()) / dx).ceil() as isize;
    let last_knot = ((hi - p.x0()) / dx).floor() as isize;
    let mut acc = CompensatedSum::new();
    if first_knot > last_knot {
        // window inside one cell
        return 0.5 * (value_at(lo) + value_at(hi)) * (hi - lo);
    }
    let x_first = p.x0() + first_knot as f64 * dx;
    let x_last = p.x0() + last_knot as f64 * dx;
    acc.add(0.5 * (value_at(lo) + value_at(x_first)) * (x_first - lo));
    for k in first_knot..last_knot {
        let xa = p.x0() + k as f64 * dx;
        acc.add(0.5 * (value_at(xa) + value_at(xa + dx)) * dx);
    }
    acc.add(0.5 * (value_at(x_last) + value_at(hi)) * (hi - x_last));
    acc.value()
}

/// Probability-weighted mean position ∫xP/∫P over [lo, hi]; registers where
/// the local fringe actually sits (e.g. before windowed moments on data whose
/// pattern may have drifted).
pub fn local_centroid(
    p: &ProbabilityField,
    window: (f64, f64),
) -> Result<f64, AnalysisError> {
    let (lo, hi) = window;
    let x_min = p.x0();
    let x_max = p.x0() + (p.len() - 1) as f64 * p.dx();
    if lo >= hi || lo < x_min - 0.5 * p.dx() || hi > x_max + 0.5 * p.dx() {
        return Err(AnalysisError::WindowOutOfRange(lo, hi));
    }
    let norm = window_integral(p, lo, hi, |_| 1.0);
    if !(norm > 0.0) {
        return Err(AnalysisError::EmptyWindow(lo, hi));
    }
    Ok(window_integral(p, lo, hi, |x| x) / norm)
}

/// Fraction of masked grid points inside [lo, hi].
pub fn mask_fraction(p: &ProbabilityField, lo: f64, hi: f64) -> f64 {
    let dx = p.dx();
    let first = ((lo - p.x0()) / dx).ceil().max(0.0) as usize;
    let last = (((hi - p.x0()) / dx).floor() as usize).min(p.len().saturating_sub(1));
    if first > last {
        return 0.0;
    }
    let masked = p.mask()[first..=last].iter().filter(|&&m| m).count();
    masked as f64 / (last - first + 1) as f64
}

/// Window-normalized central moments about `center`: with
/// w(x) = P(x)/∫ P and δx = x − center, μ₂ = ∫δx²w, μ₃ = ∫δx³w,
/// 𝒮 = μ₃/μ₂^{3/2}. Invariant under P → cP and rigid shifts of the whole
/// pattern (window riding along).
pub fn local_moments(
    p: &ProbabilityField,
    center: f64,
    window: (f64, f64),
) -> Result<(f64, f64, f64), AnalysisError> {
    let (lo, hi) = window;
    let x_min = p.x0();
    let x_max = p.x0() + (p.len() - 1) as f64 * p.dx();
    if lo >= hi || lo < x_min - 0.5 * p.dx() || hi > x_max + 0.5 * p.dx() {
        return Err(AnalysisError::WindowOutOfRange(lo, hi));
    }
    let norm = window_integral(p, lo, hi, |_| 1.0);
    if !(norm > 0.0) {
        return Err(AnalysisError::EmptyWindow(lo, hi));
    }
    let mu2 = window_integral(p, lo, hi, |x| (x - center).powi(2)) / norm;
    let mu3 = window_integral(p, lo, hi, |x| (x - center).powi(3)) / norm;
    let skewness = mu3 / mu2.powf(1.5);
    Ok((mu2, mu3, skewness))
}

/// Ordinary least squares of P against {1, δx, δx², δx³} over
/// |x − center| ≤ fit_halfwidth, on the internally rescaled basis
/// δx/fit_halfwidth (for conditioning); coefficients are returned in grid
/// length units. Errors with `IllConditioned` when the scaled design's
/// condition number exceeds 10¹⁰.
pub fn fit_local_cubic(
    p: &ProbabilityField,
    center: f64,
    fit_halfwidth: f64,
) -> Result<[f64; 4], AnalysisError> {
    let dx = p.dx();
    let first = (((center - fit_halfwidth) - p.x0()) / dx).ceil().max(0.0) as usize;
    let last = ((((center + fit_halfwidth) - p.x0()) / dx).floor() as usize)
        .min(p.len().saturating_sub(1));
    let idx: Vec<usize> = (first..=last).filter(|&k| !p.mask()[k]).collect();
    if idx.len() < 12 {
        return Err(AnalysisError::TooFewFitSamples(idx.len()));
    }
    let m = idx.len();
    let mut design = DMatrix::zeros(m, 4);
    let mut rhs = DVector::zeros(m);
    for (row, &k) in idx.iter().enumerate() {
        let u = (p.x_at(k) - center) / fit_halfwidth;
        design[(row, 0)] = 1.0;
        design[(row, 1)] = u;
        design[(row, 2)] = u * u;
        design[(row, 3)] = u * u * u;
        rhs[row] = p.values()[k];
    }
    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if cond > 1e10 {
        return Err(AnalysisError::IllConditioned(cond));
    }
    let sol = svd.solve(&rhs, 0.0).expect("svd solve after decomposition");
    let mut out = [0.0; 4];
    for j in 0..4 {
        out[j] = sol[j] / fit_halfwidth.powi(j as i32);
    }
    Ok(out)
}

/// Weighted least squares of 𝒮ₙ against K(rₙ)·rₙ through the origin:
/// theta_hat = Σwᵢyᵢxᵢ / Σwᵢxᵢ², with unit weights unless the caller folds
/// per-record variances into the records beforehand. The calibration K is
/// measured, not taken from any closed form.
pub fn estimate_theta(
    records: &[FringeRecord],
    calibration: &CalibrationTable,
) -> Result<ThetaEstimate, AnalysisError> {
    let usable: Vec<&FringeRecord> = records
        .iter()
        .filter(|rec| rec.usable() && rec.imbalance_r.is_some())
        .collect();
    if usable.is_empty() {
        return Err(AnalysisError::Underdetermined);
    }
    if usable.iter().all(|rec| rec.imbalance_r.unwrap().abs() < 1e-12) {
        return Err(AnalysisError::Degenerate);
    }
    let mut sxx = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    let mut k_mean = CompensatedSum::new();
    for rec in &usable {
        let r = rec.imbalance_r.unwrap();
        let x = calibration.k_at(r) * r;
        sxx.add(x * x);
        sxy.add(x * rec.skewness);
        k_mean.add(calibration.k_at(r));
    }
    let sxx = sxx.value();
    if !(sxx > 0.0) {
        return Err(AnalysisError::Degenerate);
    }
    let theta_hat = sxy.value() / sxx;
    let mut chi2 = CompensatedSum::new();
    for rec in &usable {
        let r = rec.imbalance_r.unwrap();
        let x = calibration.k_at(r) * r;
        let resid = rec.skewness - theta_hat * x;
        chi2.add(resid * resid);
    }
    let n = usable.len();
    let dof = n.saturating_sub(1).max(1) as f64;
    let variance = chi2.value() / dof / sxx;
    Ok(ThetaEstimate {
        theta_hat,
        // Floor keeps std_error > 0 even on exact synthetic data.
        std_error: variance.sqrt().max(1e-15 * theta_hat.abs().max(1e-15)),
        n_fringes: n,
        calibration_k: k_mean.value() / n as f64,
        residual_chi2: chi2.value(),
    })
}

/// Sample mean, standard deviation, and z = mean/(std/√N) for an ensemble of
/// per-realization skewness values.
pub fn skewness_null_test(samples: &[f64]) -> Result<(f64, f64, f64), AnalysisError> {
    if samples.len() < 100 {
        return Err(AnalysisError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean = compensated_mean(samples);
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt().max(1e-30);
    let z = mean / (std / n.sqrt());
    Ok((mean, std, z))
}

fn compensated_mean(samples: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &s in samples {
        acc.add(s);
    }
    acc.value() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn field_from_fn(n: usize, x0: f64, dx: f64, f: impl Fn(f64) -> f64) -> ProbabilityField {
        let values = (0..n).map(|k| f(x0 + k as f64 * dx)).collect();
        ProbabilityField::unmasked(values, x0, dx).unwrap()
    }

    #[test]
    fn cosine_peaks_found_and_refined() {
        let n = 4001;
        let dx = 4.0 * PI / (n - 1) as f64;
        let p = field_from_fn(n, 0.0, dx, |x| 1.0 + x.cos());
        let peaks = find_peaks(&p, 0.1).unwrap();
        // interior peak at 2π; endpoints are not interior maxima.
        assert!(peaks.iter().any(|(x, _)| (x - 2.0 * PI).abs() < dx * dx / 8.0 + 1e-12));
    }

    #[test]
    fn monotone_has_no_peaks() {
        let p = field_from_fn(100, 0.0, 0.1, |x| x);
        assert!(matches!(find_peaks(&p, 0.01), Err(AnalysisError::NoPeaks)));
    }

    #[test]
    fn polynomial_window_moments() {
        // P(σ) = 1 + 0.1σ³ on [−1, 1]: μ₂ = 1/3, μ₃ = 1/70, 𝒮 = 3^{3/2}/70.
        let n = 20001;
        let dx = 2.0 / (n - 1) as f64;
        let p = field_from_fn(n, -1.0, dx, |x| 1.0 + 0.1 * x * x * x);
        let (mu2, mu3, s) = local_moments(&p, 0.0, (-1.0, 1.0)).unwrap();
        assert_relative_eq!(mu2, 1.0 / 3.0, max_relative = 1e-7);
        assert_relative_eq!(mu3, 1.0 / 70.0, max_relative = 1e-6);
        assert_relative_eq!(s, 3.0f64.powf(1.5) / 70.0, max_relative = 1e-6);
        assert_relative_eq!(s, 0.07423, max_relative = 1e-3);
    }

    #[test]
    fn moments_even_profile_zero_skewness() {
        let n = 4001;
        let dx = 2.0 / (n - 1) as f64;
        let p = field_from_fn(n, -1.0, dx, |x| (1.0 - x * x).max(0.0));
        let (_, _, s) = local_moments(&p, 0.0, (-0.9, 0.9)).unwrap();
        assert!(s.abs() < 1e-12, "even profile skewness {s}");
    }

    #[test]
    fn moments_scale_and_shift_invariant() {
        let n = 5001;
        let dx = 2.0 / (n - 1) as f64;
        let p = field_from_fn(n, -1.0, dx, |x| 1.0 + 0.3 * x + 0.05 * x * x * x);
        let (_, _, s) = local_moments(&p, 0.1, (-0.8, 0.9)).unwrap();
        let scaled = p.scaled(7.0);
        let (_, _, s_scaled) = local_moments(&scaled, 0.1, (-0.8, 0.9)).unwrap();
        assert!((s - s_scaled).abs() < 1e-10);
        let shift = 0.37;
        let shifted = p.translated(shift);
        let (_, _, s_shift) = local_moments(&shifted, 0.1 + shift, (-0.8 + shift, 0.9 + shift)).unwrap();
        assert!((s - s_shift).abs() < 1e-10, "shift changed skewness by {}", (s - s_shift).abs());
    }

    #[test]
    fn moments_parity_flips_sign() {
        let n = 4001;
        let dx = 2.0 / (n - 1) as f64;
        let p = field_from_fn(n, -1.0, dx, |x| 1.0 + 0.1 * x * x * x);
        let (_, _, s) = local_moments(&p, 0.0, (-0.9, 0.9)).unwrap();
        let (_, _, s_mirror) = local_moments(&p.mirrored(), 0.0, (-0.9, 0.9)).unwrap();
        assert!((s + s_mirror).abs() < 1e-10);
    }

    #[test]
    fn cubic_fit_recovers_exact_polynomial() {
        let n = 201;
        let dx = 0.01;
        let truth = [2.0, -0.4, 1.3, 0.7];
        let p = field_from_fn(n, -1.0, dx, |x| {
            truth[0] + truth[1] * x + truth[2] * x * x + truth[3] * x * x * x
        });
        let fit = fit_local_cubic(&p, 0.0, 0.8).unwrap();
        for (a, b) in fit.iter().zip(truth) {
            assert_relative_eq!(*a, b, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn cubic_fit_too_few_samples() {
        let p = field_from_fn(100, 0.0, 0.1, |x| x);
        assert!(matches!(
            fit_local_cubic(&p, 5.0, 0.3),
            Err(AnalysisError::TooFewFitSamples(_))
        ));
    }

    #[test]
    fn theta_fit_round_trip() {
        let table = CalibrationTable::new(vec![(0.1, 0.5), (0.2, 0.48), (0.3, 0.45)]);
        let theta = 0.02;
        let records: Vec<FringeRecord> = [0.1, 0.2, 0.3]
            .iter()
            .map(|&r| FringeRecord {
                x_peak: 0.0,
                window: (-1.0, 1.0),
                mu2: 0.3,
                mu3: 0.0,
                skewness: theta * table.k_at(r) * r,
                poly_fit: [0.0; 4],
                imbalance_r: Some(r),
                mask_fraction: 0.0,
            })
            .collect();
        let est = estimate_theta(&records, &table).unwrap();
        assert_relative_eq!(est.theta_hat, theta, max_relative = 1e-12);
        assert!(est.std_error > 0.0);
        assert_eq!(est.n_fringes, 3);
    }

    #[test]
    fn theta_fit_degenerate_at_balance() {
        let table = CalibrationTable::new(vec![(0.1, 0.5)]);
        let records = vec![FringeRecord {
            x_peak: 0.0,
            window: (-1.0, 1.0),
            mu2: 0.3,
            mu3: 0.0,
            skewness: 0.0,
            poly_fit: [0.0; 4],
            imbalance_r: Some(0.0),
            mask_fraction: 0.0,
        }];
        assert!(matches!(estimate_theta(&records, &table), Err(AnalysisError::Degenerate)));
    }

    #[test]
    fn null_test_zero_samples() {
        let samples = vec![0.0; 200];
        let (mean, _, z) = skewness_null_test(&samples).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(z, 0.0);
        assert!(matches!(
            skewness_null_test(&samples[..50]),
            Err(AnalysisError::TooFewSamples(50))
        ));
    }

    #[test]
    fn calibration_table_interpolates() {
        let table = CalibrationTable::new(vec![(0.3, 0.45), (0.1, 0.5)]);
        assert_relative_eq!(table.k_at(0.2), 0.475, max_relative = 1e-12);
        assert_relative_eq!(table.k_at(0.05), 0.5, max_relative = 1e-12); // clamped
        assert_relative_eq!(table.k_at(0.4), 0.45, max_relative = 1e-12); // clamped
    }
}
