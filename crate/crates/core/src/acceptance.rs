//! The acceptance suite: one runner per shipped claim, each returning a
//! pass/fail outcome with a human-readable detail line. The integration test
//! and the `check` CLI verb both drive [`run_all`].

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{
    estimate_theta, find_peaks, fit_local_cubic, local_centroid, local_moments,
    skewness_null_test, AnalysisOptions,
};
use crate::born::{decompose, deformed_probability, recompose};
use crate::field::{ProbabilityField, WaveField};
use crate::fixtures;
use crate::noise::{apply_psf, sample_shots, shot_pattern, NoiseConfig};
use crate::numeric::trapezoid;
use crate::oracle::{
    adjudicate_small_imbalance, exact_intensity_si, series_delta_p_mode, BracketCandidate,
    SeriesMode,
};
use crate::params::DeformationParams;
use crate::pipeline::{
    analyze_pattern, calibrate, central_record, central_skewness, noiseless_pattern, run_scenario,
    ScenarioSpec,
};
use crate::solver::{
    continuity_residual, eigen_time_dependence, evolve, harmonic_ground_state, SolverConfig,
};
use crate::twopath::{baseline_p0, cubic_coefficient, delta_p_closed_form};

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    fn pass(id: usize, name: &'static str, detail: String) -> Self {
        Self { id, name, passed: true, detail }
    }
    fn fail(id: usize, name: &'static str, detail: String) -> Self {
        Self { id, name, passed: false, detail }
    }
}

fn outcome(id: usize, name: &'static str, result: Result<String, String>) -> CriterionOutcome {
    match result {
        Ok(detail) => CriterionOutcome::pass(id, name, detail),
        Err(detail) => CriterionOutcome::fail(id, name, detail),
    }
}

/// Run every criterion. `slow` enables the full 10⁴-realization noise null
/// (criterion 6); the default uses a reduced but statistically meaningful
/// ensemble.
pub fn run_all(slow: bool) -> Vec<CriterionOutcome> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(if slow { 10_000 } else { 1_500 }),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ]
}

const AMPLITUDE_PAIRS: [(f64, f64); 3] = [(1.2, 0.8), (2.0, 1.0), (1.05, 0.95)];

/// 1: the σ³ coefficient of the exact deformed intensity matches
/// (2/3)θR₁R₂(R₁−R₂)/(R₁+R₂) within 1% for all shipped amplitude pairs.
fn criterion_1() -> CriterionOutcome {
    let name = "cubic-coefficient law";
    let run = || -> Result<String, String> {
        let mut worst = 0.0f64;
        for &(r1, r2) in &AMPLITUDE_PAIRS {
            for &theta in &[0.01, 0.05] {
                let series = series_delta_p_mode(r1, r2, theta, 0, SeriesMode::Full)
                    .map_err(|e| e.to_string())?;
                let law = cubic_coefficient(r1, r2, theta).map_err(|e| e.to_string())?;
                let rel = (series.coefficients[3] - law).abs() / law.abs();
                worst = worst.max(rel);
                if rel > 0.01 {
                    return Err(format!(
                        "R1={r1} R2={r2} theta={theta}: c3={} vs law {} ({:.3}% off)",
                        series.coefficients[3],
                        law,
                        rel * 100.0
                    ));
                }
            }
        }
        Ok(format!("worst relative deviation {:.2e} (bound 1e-2)", worst))
    };
    outcome(1, name, run())
}

/// 2: no linear/quadratic distortion — θ-odd series has |c₁|, |c₂|
/// negligible against the cubic term, first-order-field peaks and curvature
/// are θ-independent, and the exact field's central peak does not move.
fn criterion_2() -> CriterionOutcome {
    let name = "no linear/quadratic distortion";
    let run = || -> Result<String, String> {
        let sigma_fit: f64 = 0.24; // stencil range of the series oracle
        for &(r1, r2) in &AMPLITUDE_PAIRS {
            for &theta in &[0.01, 0.05] {
                let s = series_delta_p_mode(r1, r2, theta, 0, SeriesMode::ThetaOdd)
                    .map_err(|e| e.to_string())?;
                let cubic_scale = (s.coefficients[3] * sigma_fit.powi(3)).abs();
                if (s.coefficients[1] * sigma_fit).abs() > 1e-4 * cubic_scale
                    || (s.coefficients[2] * sigma_fit * sigma_fit).abs() > 1e-4 * cubic_scale
                {
                    return Err(format!(
                        "R1={r1} R2={r2} theta={theta}: c1={:.3e} c2={:.3e} vs cubic scale {:.3e}",
                        s.coefficients[1], s.coefficients[2], cubic_scale
                    ));
                }
            }
        }

        // Peak positions and curvature from the first-order field.
        let spacing = 2.0 * std::f64::consts::PI;
        let scenario = ScenarioSpec::five_fringes(0.2);
        let peaks_and_curvature = |theta: f64| -> Result<(Vec<f64>, Vec<f64>), String> {
            let params = DeformationParams::new(1.0, theta).map_err(|e| e.to_string())?;
            let model = scenario.build_model(&params).map_err(|e| e.to_string())?;
            let p0 = baseline_p0(&model, &params).map_err(|e| e.to_string())?;
            let dp = delta_p_closed_form(&model, &params).map_err(|e| e.to_string())?;
            // The first-order sum dips below zero far from the bright
            // fringes (the linear secular term beats the small P₀ there);
            // clamp and mask those points — the peak/curvature checks only
            // consume the neighborhoods of the maxima.
            let mut mask = dp.mask.clone();
            let values: Vec<f64> = p0
                .values()
                .iter()
                .zip(&dp.values)
                .enumerate()
                .map(|(k, (a, b))| {
                    let v = a + b;
                    if v < 0.0 {
                        mask[k] = true;
                    }
                    v.max(0.0)
                })
                .collect();
            let field = ProbabilityField::new(values, mask, p0.x0(), p0.dx())
                .map_err(|e| e.to_string())?;
            let peaks = find_peaks(&field, 0.1).map_err(|e| e.to_string())?;
            let mut xs = Vec::new();
            let mut curvatures = Vec::new();
            for (x, _) in peaks {
                xs.push(x);
                let fit = fit_local_cubic(&field, x, 1.8).map_err(|e| e.to_string())?;
                curvatures.push(fit[2]);
            }
            Ok((xs, curvatures))
        };
        let (x0, c0) = peaks_and_curvature(0.0)?;
        let (x1, c1) = peaks_and_curvature(0.1)?;
        if x0.len() != x1.len() {
            return Err(format!("peak count changed: {} vs {}", x0.len(), x1.len()));
        }
        let mut worst_shift = 0.0f64;
        let mut worst_curv = 0.0f64;
        for k in 0..x0.len() {
            worst_shift = worst_shift.max((x1[k] - x0[k]).abs() / spacing);
            worst_curv = worst_curv.max((c1[k] / c0[k] - 1.0).abs());
        }
        if worst_shift > 1e-3 {
            return Err(format!("first-order peak shift {worst_shift:.3e} fringe spacings"));
        }
        if worst_curv > 1e-3 {
            return Err(format!("curvature changed by {worst_curv:.3e} relative"));
        }

        // Exact field: the central (n = 0) peak stays put to all orders.
        let central_peak = |theta: f64| -> Result<f64, String> {
            let params = DeformationParams::new(1.0, theta).map_err(|e| e.to_string())?;
            let model = scenario.build_model(&params).map_err(|e| e.to_string())?;
            let p = noiseless_pattern(&model, &params).map_err(|e| e.to_string())?;
            let peaks = find_peaks(&p, 0.05).map_err(|e| e.to_string())?;
            peaks
                .iter()
                .map(|(x, _)| *x)
                .min_by(|a, b| a.abs().total_cmp(&b.abs()))
                .ok_or_else(|| "no central peak".to_string())
        };
        let exact_shift = (central_peak(0.1)? - central_peak(0.0)?).abs() / spacing;
        if exact_shift > 1e-3 {
            return Err(format!("exact central peak moved {exact_shift:.3e} fringe spacings"));
        }
        Ok(format!(
            "series c1/c2 negligible; first-order peak shift {:.1e}, curvature change {:.1e}, exact central shift {:.1e}",
            worst_shift, worst_curv, exact_shift
        ))
    };
    outcome(2, name, run())
}

/// 3: |P_exact(θ) − P₀ − δP_closed| over bright windows scales as θ²
/// (ratio in [3.5, 4.5] when θ doubles from 0.025 to 0.05).
fn criterion_3() -> CriterionOutcome {
    let name = "closed-form validity (theta^2 residual)";
    let run = || -> Result<String, String> {
        // The single-branch closed form exists only while the deformed
        // imbalance keeps its sign, i.e. θ|Δ|/2 < atanh(r); at θ = 0.05 and
        // r = 0.2 that bounds the window set to |n| ≤ 1 (the n = ±2 track
        // crosses a node line and the branch convention breaks down).
        let (r1, r2) = (1.2, 0.8);
        let residual = |theta: f64| -> Result<f64, String> {
            let mut worst = 0.0f64;
            for n in -1i64..=1 {
                for j in -40..=40 {
                    let sigma = 1.2 * j as f64 / 40.0;
                    let exact =
                        exact_intensity_si(r1, r2, theta, n, sigma).map_err(|e| e.to_string())?;
                    let p0 = r1 * r1 + r2 * r2 + 2.0 * r1 * r2 * sigma.cos();
                    // closed form under the same per-fringe branch convention
                    let delta = 2.0 * std::f64::consts::PI * n as f64 + sigma;
                    let r = (r1 - r2) / (r1 + r2);
                    let cf = theta * (r1 * r1 - r2 * r2) * delta
                        - 2.0 * theta * p0 * (r * (0.5 * sigma).tan()).atan();
                    worst = worst.max((exact - p0 - cf).abs());
                }
            }
            Ok(worst)
        };
        let e_small = residual(0.025)?;
        let e_big = residual(0.05)?;
        let ratio = e_big / e_small;
        if !(3.5..=4.5).contains(&ratio) {
            return Err(format!(
                "residual ratio {ratio:.3} outside [3.5, 4.5] (err(0.05)={e_big:.3e}, err(0.025)={e_small:.3e})"
            ));
        }

        // Cross-check the field-level implementation against the same bound.
        // The field carries the phase continued from the central anchor; the
        // closed form is stated in the per-fringe branch convention, which
        // re-anchors every 2π and differs by the exact gauge factor
        // e^{−2θnπ} on fringe n. Align conventions before comparing.
        let field_residual = |theta: f64| -> Result<f64, String> {
            let params = DeformationParams::new(1.0, theta).map_err(|e| e.to_string())?;
            let scenario = ScenarioSpec::five_fringes(0.2);
            let model = scenario.build_model(&params).map_err(|e| e.to_string())?;
            let field = crate::twopath::build_field(&model, &params).map_err(|e| e.to_string())?;
            let exact = crate::born::deformed_probability(&field, &params, field.len() / 2)
                .map_err(|e| e.to_string())?;
            let p0 = baseline_p0(&model, &params).map_err(|e| e.to_string())?;
            let cf = delta_p_closed_form(&model, &params).map_err(|e| e.to_string())?;
            let mut worst = 0.0f64;
            for k in 0..exact.len() {
                let delta = model.delta(&params)[k];
                let n_fringe = (delta / std::f64::consts::TAU).round();
                let sigma = delta - std::f64::consts::TAU * n_fringe;
                // same validity bound as the scalar check: |n| <= 1
                if sigma.abs() > 1.2 || delta.abs() > 3.0 * std::f64::consts::PI || cf.mask[k] {
                    continue;
                }
                let per_fringe =
                    exact.values()[k] * (2.0 * theta * n_fringe * std::f64::consts::PI).exp();
                worst = worst.max((per_fringe - p0.values()[k] - cf.values[k]).abs());
            }
            Ok(worst)
        };
        let f_small = field_residual(0.025)?;
        let f_big = field_residual(0.05)?;
        let f_ratio = f_big / f_small;
        if !(3.5..=4.5).contains(&f_ratio) {
            return Err(format!("field-level residual ratio {f_ratio:.3} outside [3.5, 4.5]"));
        }
        Ok(format!("scalar ratio {ratio:.3}, field ratio {f_ratio:.3} (both in [3.5, 4.5])"))
    };
    outcome(3, name, run())
}

/// 4: the bracket adjudication converges, the chosen convention's error
/// shrinks at least quadratically when ε halves, and its Taylor limit
/// reproduces the cubic coefficient.
fn criterion_4() -> CriterionOutcome {
    let name = "small-imbalance adjudication";
    let run = || -> Result<String, String> {
        let report = adjudicate_small_imbalance().map_err(|e| e.to_string())?;
        if report.chosen != BracketCandidate::FullDelta {
            return Err(format!("unexpected convention chosen: {:?}", report.chosen));
        }
        if report.halving_ratios.0 < 3.5 {
            return Err(format!(
                "chosen bracket error ratio {:.2} under halving; needs >= 3.5 (at least quadratic)",
                report.halving_ratios.0
            ));
        }
        if (report.cubic_prefactor - 1.0).abs() > 0.01 {
            return Err(format!(
                "Taylor limit prefactor {:.5} deviates from the cubic law",
                report.cubic_prefactor
            ));
        }
        Ok(format!(
            "full-Delta bracket chosen; halving ratios: chosen {:.1}, rejected {:.2}; cubic prefactor {:.5}",
            report.halving_ratios.0, report.halving_ratios.1, report.cubic_prefactor
        ))
    };
    outcome(4, name, run())
}

/// 5: pipeline-measured 𝒮 over θ×r fits 𝒮 = K(r)·θ·r with R² > 0.999 and
/// per-point deviation < 2%; exactly zero (1e-10) at r = 0.
fn criterion_5() -> CriterionOutcome {
    let name = "skewness scaling S = K*theta*r";
    let run = || -> Result<String, String> {
        let options = AnalysisOptions::default();
        let table = match fixtures::builtin().and_then(|f| f.calibration_table()) {
            Ok(t) => t,
            Err(_) => calibrate(&fixtures::CALIBRATION_RS, fixtures::CALIBRATION_THETA, 1.0, &options)
                .map_err(|e| e.to_string())?,
        };
        let mut worst_dev = 0.0f64;
        let mut points = Vec::new();
        for &theta in &[0.01, 0.02, 0.04] {
            let params = DeformationParams::new(1.0, theta).map_err(|e| e.to_string())?;
            for &r in &[0.1, 0.2, 0.3] {
                let (_, records) =
                    run_scenario(&ScenarioSpec::five_fringes(r), &params, None, &options)
                        .map_err(|e| e.to_string())?;
                let s = central_skewness(&records).ok_or("no usable fringe records")?;
                let predicted = table.k_at(r) * theta * r;
                let dev = (s / predicted - 1.0).abs();
                worst_dev = worst_dev.max(dev);
                if dev > 0.02 {
                    return Err(format!(
                        "theta={theta} r={r}: S={s:.6e} vs K*theta*r={predicted:.6e} ({:.2}% off)",
                        dev * 100.0
                    ));
                }
                points.push((predicted, s));
            }
        }
        // R² of the through-origin fit S against predicted.
        let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
        let slope = sxy / sxx;
        let mean_y: f64 = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
        let ss_res: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
        let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
        let r2 = 1.0 - ss_res / ss_tot;
        if r2 <= 0.999 {
            return Err(format!("fit R^2 = {r2:.6} <= 0.999"));
        }

        // Balanced null: the measured scalar 𝒮 (central fringe) is exactly
        // zero — the balanced field 2R·cosh((θ+i)x'/2) is even in x.
        let params = DeformationParams::new(1.0, 0.04).map_err(|e| e.to_string())?;
        let (_, records) =
            run_scenario(&ScenarioSpec::five_fringes(0.0), &params, None, &options)
                .map_err(|e| e.to_string())?;
        let s0 = central_skewness(&records).ok_or("no usable balanced record")?;
        if s0.abs() > 1e-10 {
            return Err(format!("balanced skewness {s0:.3e} exceeds 1e-10"));
        }
        Ok(format!("R^2 = {r2:.7}, worst per-point deviation {:.2}%, balanced null clean", worst_dev * 100.0))
    };
    outcome(5, name, run())
}

fn mix_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 step over seed ⊕ counter
    let mut z = seed ^ i.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Centroid-centered skewness inside a fixed window (robust against the
/// rigid pattern shifts that path jitter induces).
fn centroid_skewness(p: &ProbabilityField, window: (f64, f64)) -> Result<f64, String> {
    let dx = p.dx();
    let lo_idx = ((window.0 - p.x0()) / dx).ceil().max(0.0) as usize;
    let hi_idx = (((window.1 - p.x0()) / dx).floor() as usize).min(p.len() - 1);
    let mut norm = 0.0;
    let mut first = 0.0;
    for k in lo_idx..=hi_idx {
        norm += p.values()[k];
        first += p.values()[k] * p.x_at(k);
    }
    if norm <= 0.0 {
        return Err("empty window in null-test realization".into());
    }
    let centroid = first / norm;
    let (_, _, s) = local_moments(p, centroid, window).map_err(|e| e.to_string())?;
    Ok(s)
}

/// 6: symmetric-noise null — θ = 0, per-shot phase/path jitter, detector
/// PSF, and multinomial event noise produce |mean 𝒮| ≤ 3·std/√N per fringe.
fn criterion_6(realizations: usize) -> CriterionOutcome {
    let name = "symmetric-noise null";
    let run = || -> Result<String, String> {
        let params = DeformationParams::undeformed(1.0);
        let fringe = 2.0 * std::f64::consts::PI;
        let scenario = ScenarioSpec::five_fringes(0.2);
        let model = scenario.build_model(&params).map_err(|e| e.to_string())?;
        let cfg = NoiseConfig {
            phase_jitter_sigma: 0.5,
            path_jitter_sigma: 0.1 * fringe,
            psf_sigma: 0.1 * fringe,
            shots: 1,
            events_per_shot: 1_000_000,
            seed: 20_260_826,
        };
        let clean = noiseless_pattern(&model, &params).map_err(|e| e.to_string())?;
        let peaks = find_peaks(&clean, 0.1).map_err(|e| e.to_string())?;
        // fixed windows, slightly shrunk so jittered fringes stay inside
        let windows: Vec<(f64, f64)> = peaks
            .iter()
            .map(|(x, (lo, hi))| {
                let half = 0.85 * (x - lo).min(hi - x);
                (x - half, x + half)
            })
            .collect();
        let anchor = clean
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);

        let per_realization: Result<Vec<Vec<f64>>, String> = (0..realizations as u64)
            .into_par_iter()
            .map(|i| {
                let p = shot_pattern(&model, &params, &cfg, i, anchor).map_err(|e| e.to_string())?;
                let blurred = apply_psf(&p, cfg.psf_sigma).map_err(|e| e.to_string())?;
                let counts = sample_shots(&blurred, cfg.events_per_shot, mix_seed(cfg.seed, i))
                    .map_err(|e| e.to_string())?;
                let hist = ProbabilityField::unmasked(
                    counts.iter().map(|&c| c as f64).collect(),
                    blurred.x0(),
                    blurred.dx(),
                )
                .map_err(|e| e.to_string())?;
                windows.iter().map(|&w| centroid_skewness(&hist, w)).collect()
            })
            .collect();
        let per_realization = per_realization?;

        let mut details = Vec::new();
        for (f, _) in windows.iter().enumerate() {
            let samples: Vec<f64> = per_realization.iter().map(|row| row[f]).collect();
            let (mean, std, z) = skewness_null_test(&samples).map_err(|e| e.to_string())?;
            if z.abs() > 3.0 {
                return Err(format!(
                    "fringe {f}: mean S = {mean:.3e}, std {std:.3e}, |z| = {:.2} > 3",
                    z.abs()
                ));
            }
            details.push(format!("{:.2}", z.abs()));
        }
        Ok(format!("N = {realizations}; per-fringe |z| = [{}] (bound 3)", details.join(", ")))
    };
    outcome(6, name, run())
}

/// 7: θ round trip — θ̂ recovers 0.02 within 5% on noiseless data and within
/// 2 standard errors with criterion-6 noise and event sampling. The noisy
/// branch calibrates through the same noise model, as an instrument-response
/// calibration would.
fn criterion_7() -> CriterionOutcome {
    let name = "theta round trip";
    let run = || -> Result<String, String> {
        let options = AnalysisOptions::default();
        let theta = 0.02;
        let rs = [0.1, 0.2, 0.3];

        // Noiseless branch against the shipped calibration.
        let table = match fixtures::builtin().and_then(|f| f.calibration_table()) {
            Ok(t) => t,
            Err(_) => calibrate(&fixtures::CALIBRATION_RS, fixtures::CALIBRATION_THETA, 1.0, &options)
                .map_err(|e| e.to_string())?,
        };
        let params = DeformationParams::new(1.0, theta).map_err(|e| e.to_string())?;
        let mut records = Vec::new();
        for &r in &rs {
            let (_, recs) = run_scenario(&ScenarioSpec::five_fringes(r), &params, None, &options)
                .map_err(|e| e.to_string())?;
            records.push(central_record(&recs).ok_or("no usable central record")?.clone());
        }
        let clean_est = estimate_theta(&records, &table).map_err(|e| e.to_string())?;
        let clean_dev = (clean_est.theta_hat / theta - 1.0).abs();
        if clean_dev > 0.05 {
            return Err(format!(
                "noiseless theta_hat = {:.5} deviates {:.2}% from 0.02",
                clean_est.theta_hat,
                clean_dev * 100.0
            ));
        }

        // Noisy branch: jitter + PSF ensembles, multinomial events, and a
        // calibration run through the identical noise pipeline.
        let fringe = 2.0 * std::f64::consts::PI;
        // criterion-6 jitter and PSF magnitudes
        let noise = |seed: u64| NoiseConfig {
            phase_jitter_sigma: 0.5,
            path_jitter_sigma: 0.1 * fringe,
            psf_sigma: 0.1 * fringe,
            shots: 8192,
            events_per_shot: 0,
            seed,
        };
        // Noisy 𝒮 in the central window taken from the clean pattern (peak
        // detection on raw event histograms is meaningless; a real instrument
        // uses its calibrated geometry), re-registered on the run's measured
        // fringe centroid to cancel residual pattern drift.
        let central_window = |r: f64, params: &DeformationParams| -> Result<(f64, (f64, f64), f64), String> {
            let scenario = ScenarioSpec::five_fringes(r);
            let model = scenario.build_model(params).map_err(|e| e.to_string())?;
            let clean = noiseless_pattern(&model, params).map_err(|e| e.to_string())?;
            let recs = analyze_pattern(&clean, Some(&model), &options).map_err(|e| e.to_string())?;
            let rec = central_record(&recs).ok_or("no usable central record")?;
            let centroid = local_centroid(&clean, rec.window).map_err(|e| e.to_string())?;
            Ok((rec.x_peak, rec.window, centroid))
        };
        let noisy_skewness = |theta_run: f64, r: f64, seed: u64, sample_events: Option<u64>|
            -> Result<f64, String> {
            let params = DeformationParams::new(1.0, theta_run).map_err(|e| e.to_string())?;
            let scenario = ScenarioSpec::five_fringes(r);
            let model = scenario.build_model(&params).map_err(|e| e.to_string())?;
            let cfg = noise(seed);
            let pattern = crate::noise::ensemble_pattern(&model, &params, &cfg)
                .map_err(|e| e.to_string())?;
            let pattern = match sample_events {
                None => pattern,
                Some(events) => {
                    let counts = sample_shots(&pattern, events, mix_seed(seed, 1000))
                        .map_err(|e| e.to_string())?;
                    ProbabilityField::unmasked(
                        counts.iter().map(|&c| c as f64).collect(),
                        pattern.x0(),
                        pattern.dx(),
                    )
                    .map_err(|e| e.to_string())?
                }
            };
            let (center, window, clean_centroid) = central_window(r, &params)?;
            let drift = local_centroid(&pattern, window).map_err(|e| e.to_string())? - clean_centroid;
            let (_, _, s) = local_moments(
                &pattern,
                center + drift,
                (window.0 + drift, window.1 + drift),
            )
            .map_err(|e| e.to_string())?;
            Ok(s)
        };
        // The noisy chain multiplies 𝒮 by an instrument-response factor and
        // leaves per-run scatter comparable to the weaker-imbalance signals,
        // so the noisy estimate uses the strongest point (r = 0.3), repeats
        // over independent seeds, and propagates empirical standard errors
        // through a same-chain calibration at θ_cal.
        let theta_cal = 0.01;
        let r_noisy = 0.3;
        let n_seeds = 10u64;
        let mean_sem = |vals: &[f64]| -> (f64, f64) {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        };
        let mut cal_vals = Vec::new();
        for j in 0..n_seeds {
            cal_vals.push(noisy_skewness(theta_cal, r_noisy, mix_seed(777, j), None)?);
        }
        let (s_cal, sem_cal) = mean_sem(&cal_vals);
        let mut est_vals = Vec::new();
        for j in 0..n_seeds {
            est_vals.push(noisy_skewness(theta, r_noisy, mix_seed(42, j), Some(1_000_000_000))?);
        }
        let (s_est, sem_est) = mean_sem(&est_vals);
        if !(s_cal > 0.0) {
            return Err(format!("noisy calibration skewness {s_cal:.3e} not positive"));
        }
        let k_noisy = s_cal / (theta_cal * r_noisy);
        let theta_noisy = s_est / (k_noisy * r_noisy);
        let sigma_theta = theta_noisy
            * ((sem_est / s_est).powi(2) + (sem_cal / s_cal).powi(2)).sqrt();
        if sigma_theta > 0.5 * theta {
            return Err(format!(
                "noisy estimate has no power: sigma_theta = {sigma_theta:.3e} vs theta = {theta}"
            ));
        }
        let pull = (theta_noisy - theta).abs() / sigma_theta;
        if pull > 2.0 {
            return Err(format!(
                "noisy theta_hat = {theta_noisy:.5} +/- {sigma_theta:.5}: {pull:.2} standard errors from 0.02"
            ));
        }
        Ok(format!(
            "noiseless {:.5} ({:.2}% off); noisy {:.5} +/- {:.5} ({:.2} sigma over {} seeds)",
            clean_est.theta_hat, clean_dev * 100.0, theta_noisy, sigma_theta, pull, n_seeds
        ))
    };
    outcome(7, name, run())
}

/// 8: solver validation — free-Gaussian dispersion at θ = 0 (1e-6),
/// complex-κ single-mode dispersion (1e-6), linearity (1e-12), and θ = 0
/// norm drift < 1e-8 over 10⁴ steps.
fn criterion_8() -> CriterionOutcome {
    let name = "solver validation";
    let run = || -> Result<String, String> {
        // Free Gaussian at θ = 0.
        let n = 2048;
        let dx = 40.0 / n as f64;
        let params0 = DeformationParams::undeformed(1.0);
        let (sigma, k0, mass, t_final) = (1.0f64, 2.0, 1.0, 1.5);
        let initial = WaveField::from_fn(n, -20.0, dx, |x| {
            Complex64::new(0.0, k0 * x).exp() * (-(x + 3.0) * (x + 3.0) / (4.0 * sigma * sigma)).exp()
        })
        .map_err(|e| e.to_string())?;
        let cfg = SolverConfig {
            trace_stride: 3000,
            ..SolverConfig::free(mass, n, t_final / 3000.0, 3000)
        };
        let report = evolve(&initial, &cfg, &params0).map_err(|e| e.to_string())?;
        let s_t2 = sigma * sigma * (1.0 + (t_final / (2.0 * mass * sigma * sigma)).powi(2));
        let center = -3.0 + k0 / mass * t_final;
        let final_p = report.final_field.abs_squared();
        let total = trapezoid(&final_p, dx);
        let mut gauss_err = 0.0f64;
        let mut cum = 0.0;
        for (k, &p) in final_p.iter().enumerate() {
            cum += p * dx;
            if cum < 0.05 * total || cum > 0.95 * total {
                continue;
            }
            let x = report.final_field.x_at(k);
            let expected =
                (sigma * sigma / s_t2).sqrt() * (-(x - center).powi(2) / (2.0 * s_t2)).exp();
            gauss_err = gauss_err.max((p - expected).abs() / expected);
        }
        if gauss_err > 1e-6 {
            return Err(format!("free Gaussian mismatch {gauss_err:.3e} > 1e-6"));
        }

        // Complex-κ plane-wave dispersion. n = 64 over L = 8π keeps
        // k_max ≈ 8 so the Im κ amplification of grid-level roundoff
        // (e^{θ·k²·t/2m} at the Nyquist mode) stays below the tolerance.
        let params = DeformationParams::new(1.0, 0.1).map_err(|e| e.to_string())?;
        let n2 = 64;
        let dx2 = 8.0 * std::f64::consts::PI / n2 as f64;
        let k_mode = 2.0 * std::f64::consts::PI * 6.0 / (n2 as f64 * dx2);
        let mode = WaveField::from_fn(n2, 0.0, dx2, |x| Complex64::new(0.0, k_mode * x).exp())
            .map_err(|e| e.to_string())?;
        let t2 = 0.5;
        let cfg2 = SolverConfig::free(1.0, n2, t2 / 500.0, 500);
        let rep2 = evolve(&mode, &cfg2, &params).map_err(|e| e.to_string())?;
        let omega = params.kappa() * k_mode * k_mode / 2.0;
        let factor = (-Complex64::i() * omega * t2).exp();
        let mut disp_err = 0.0f64;
        for (a, b) in rep2.final_field.samples().iter().zip(mode.samples()) {
            disp_err = disp_err.max((a - b * factor).norm());
        }
        if disp_err > 1e-6 {
            return Err(format!("dispersion mismatch {disp_err:.3e} > 1e-6"));
        }

        // Linearity.
        let psi2 = WaveField::from_fn(n2, 0.0, dx2, |x| {
            Complex64::new(0.0, -2.0 * k_mode * x).exp() * (0.5 + 0.1 * (x * 0.3).sin())
        })
        .map_err(|e| e.to_string())?;
        let combo = WaveField::new(
            mode.samples()
                .iter()
                .zip(psi2.samples())
                .map(|(a, b)| 0.7 * a + Complex64::new(0.0, 0.4) * b)
                .collect(),
            0.0,
            dx2,
        )
        .map_err(|e| e.to_string())?;
        let ra = evolve(&mode, &cfg2, &params).map_err(|e| e.to_string())?;
        let rb = evolve(&psi2, &cfg2, &params).map_err(|e| e.to_string())?;
        let rc = evolve(&combo, &cfg2, &params).map_err(|e| e.to_string())?;
        let scale = rc.final_field.max_abs();
        let mut lin_err = 0.0f64;
        for ((a, b), c) in ra
            .final_field
            .samples()
            .iter()
            .zip(rb.final_field.samples())
            .zip(rc.final_field.samples())
        {
            lin_err = lin_err.max((0.7 * a + Complex64::new(0.0, 0.4) * b - c).norm() / scale);
        }
        if lin_err > 1e-12 {
            return Err(format!("linearity violation {lin_err:.3e} > 1e-12"));
        }

        // Norm drift over 10⁴ steps at θ = 0.
        let packet = WaveField::from_fn(n2, 0.0, dx2, |x| {
            Complex64::new(0.0, k_mode * x).exp()
                * (-(x - 12.0) * (x - 12.0) / 8.0).exp()
        })
        .map_err(|e| e.to_string())?;
        let mut cfg3 = SolverConfig::free(1.0, n2, 1e-3, 10_000);
        cfg3.trace_stride = 1000;
        let rep3 = evolve(&packet, &cfg3, &params0).map_err(|e| e.to_string())?;
        let n0 = rep3.norm_trace[0].born_norm;
        let mut drift = 0.0f64;
        for s in &rep3.norm_trace {
            drift = drift.max((s.born_norm / n0 - 1.0).abs());
        }
        if drift > 1e-8 {
            return Err(format!("norm drift {drift:.3e} > 1e-8 over 1e4 steps"));
        }
        Ok(format!(
            "gaussian {gauss_err:.1e}, dispersion {disp_err:.1e}, linearity {lin_err:.1e}, drift {drift:.1e}"
        ))
    };
    outcome(8, name, run())
}

/// 9: a harmonic-well eigenstate evolved for one period matches the analytic
/// factor e^{−iEt/κ} within 1e-8.
fn criterion_9() -> CriterionOutcome {
    let name = "eigen-factor consistency";
    let run = || -> Result<String, String> {
        // n = 64 (k_max ≈ 8.4) and θ = 0.02 keep the Im κ roundoff
        // amplification e^{θ·k_max²·T/2m} ≈ e^{4.4} harmless over the full
        // period, while the Gaussian stays spectrally resolved.
        let n = 64;
        let dx = 24.0 / n as f64;
        let x0 = -12.0;
        let (mass, omega) = (1.0, 1.0);
        let params = DeformationParams::new(1.0, 0.02).map_err(|e| e.to_string())?;
        let (state, energy) =
            harmonic_ground_state(n, x0, dx, mass, omega, &params).map_err(|e| e.to_string())?;
        let period = 2.0 * std::f64::consts::PI / omega;
        let steps = 200_000;
        let potential: Vec<f64> = (0..n)
            .map(|k| 0.5 * mass * omega * omega * (x0 + k as f64 * dx).powi(2))
            .collect();
        let cfg = SolverConfig {
            mass,
            potential,
            dt: period / steps as f64,
            n_steps: steps,
            boundary: crate::solver::Boundary::Periodic,
            trace_stride: steps,
            record_residuals: false,
        };
        let report = evolve(&state, &cfg, &params).map_err(|e| e.to_string())?;
        let factor = eigen_time_dependence(energy, period, &params);
        let scale = state.max_abs();
        let mut err = 0.0f64;
        for (a, b) in report.final_field.samples().iter().zip(state.samples()) {
            err = err.max((a - b * factor).norm() / scale);
        }
        if err > 1e-8 {
            return Err(format!("eigenstate evolution error {err:.3e} > 1e-8 over one period"));
        }
        Ok(format!("max deviation {err:.2e} over one period (bound 1e-8)"))
    };
    outcome(9, name, run())
}

/// 10: the continuity residual converges at the discretization rate at
/// θ = 0, and at θ ≠ 0 it matches the companion diffusion source
/// −(2 Im κ/m)R∇²R within 2× the discretization error.
fn criterion_10() -> CriterionOutcome {
    let name = "continuity diagnostics";
    let run = || -> Result<String, String> {
        let residual_norms = |n: usize, theta: f64, dt: f64| -> Result<(f64, f64, f64), String> {
            let dx = 40.0 / n as f64;
            let params = DeformationParams::new(1.0, theta).map_err(|e| e.to_string())?;
            let initial = WaveField::from_fn(n, -20.0, dx, |x| {
                Complex64::new(0.0, 1.5 * x).exp() * (-x * x / 8.0).exp()
            })
            .map_err(|e| e.to_string())?;
            let l2 = |v: &[f64], mask: &[bool]| -> f64 {
                (v.iter()
                    .zip(mask)
                    .filter(|(_, &m)| !m)
                    .map(|(x, _)| x * x)
                    .sum::<f64>()
                    * dx)
                    .sqrt()
            };
            let steps = (0.2 / dt).round() as usize;
            let cfg = SolverConfig::free(1.0, n, dt, steps);
            let rep = evolve(&initial, &cfg, &params).map_err(|e| e.to_string())?;
            let cfg_pair = SolverConfig::free(1.0, n, dt, 1);
            let next = evolve(&rep.final_field, &cfg_pair, &params).map_err(|e| e.to_string())?;
            let diag = continuity_residual(&rep.final_field, &next.final_field, dt, &cfg_pair, &params)
                .map_err(|e| e.to_string())?;
            let mismatch: Vec<f64> = diag
                .residual
                .iter()
                .zip(&diag.diffusion)
                .map(|(r, d)| r - d)
                .collect();
            Ok((
                l2(&diag.residual, &diag.mask),
                l2(&diag.diffusion, &diag.mask),
                l2(&mismatch, &diag.mask),
            ))
        };

        // θ = 0 second-order convergence under joint dx+dt refinement;
        // the diagnostic mixes an O(dt²) time term with an O(dx⁴) spatial
        // floor, so halving dt alone bottoms out on the latter.
        let (r_coarse, _, _) = residual_norms(512, 0.0, 2e-3)?;
        let (r_fine, _, _) = residual_norms(1024, 0.0, 1e-3)?;
        let rate = r_coarse / r_fine;
        if !(3.5..=18.0).contains(&rate) {
            return Err(format!(
                "theta=0 residual refinement ratio {rate:.2} outside [3.5, 18]"
            ));
        }

        // θ ≠ 0: residual ≈ diffusion within 2× the discretization error.
        // Coarser grid (k_max = 20): at θ = 0.05 a fine grid amplifies
        // Nyquist-level roundoff by e^{θ·k_max²·T/2m} past the signal.
        let theta = 0.05;
        let (ref_fine, _, _) = residual_norms(256, 0.0, 1e-3)?;
        let (resid, diffusion, mismatch) = residual_norms(256, theta, 1e-3)?;
        let disc = ref_fine.max(1e-300);
        if mismatch > 2.0 * disc {
            return Err(format!(
                "residual-diffusion mismatch {mismatch:.3e} exceeds 2x discretization error {disc:.3e}"
            ));
        }
        if diffusion < 10.0 * mismatch {
            return Err(format!(
                "diffusion term {diffusion:.3e} not resolved above mismatch {mismatch:.3e}"
            ));
        }
        Ok(format!(
            "theta=0 rate {rate:.2}; theta={theta}: |residual| = {resid:.3e} tracks |diffusion| = {diffusion:.3e}, mismatch {mismatch:.3e} <= 2x{disc:.3e}. NOTE: the unmodified zero-source continuity claim fails at exactly this diffusion magnitude; the identity residual = -(2 Im kappa/m) R lap(R) is what holds."
        ))
    };
    outcome(10, name, run())
}

/// 11: anchor/scale/translation invariance suite at 1e-10–1e-12.
fn criterion_11() -> CriterionOutcome {
    let name = "invariance suite";
    let run = || -> Result<String, String> {
        let params = DeformationParams::new(1.0, 0.07).map_err(|e| e.to_string())?;
        let n = 1024;
        let dx = 0.01;
        let field = WaveField::from_fn(n, 0.0, dx, |x| {
            Complex64::new(0.2 * x, 0.9 * x).exp() * (1.0 + 0.1 * (3.0 * x).cos())
        })
        .map_err(|e| e.to_string())?;

        // Round trip decompose → recompose.
        let pa = decompose(&field, &params, 0).map_err(|e| e.to_string())?;
        let back = recompose(&pa, &params).map_err(|e| e.to_string())?;
        let scale = field.max_abs();
        let mut rt_err = 0.0f64;
        for (a, b) in back.samples().iter().zip(field.samples()) {
            rt_err = rt_err.max((a - b).norm() / scale);
        }
        if rt_err > 1e-12 {
            return Err(format!("decompose/recompose round trip error {rt_err:.3e} > 1e-12"));
        }

        // Anchor independence. The anchor fixes the phase branch via the
        // principal argument, so two anchors agree exactly when they sit on
        // the same 2π branch (here φ = 0.9x, so indices below π/0.009).
        let p_a = deformed_probability(&field, &params, 3).map_err(|e| e.to_string())?;
        let p_b = deformed_probability(&field, &params, 300).map_err(|e| e.to_string())?;
        let mut anchor_err = 0.0f64;
        for (a, b) in p_a.values().iter().zip(p_b.values()) {
            anchor_err = anchor_err.max((a - b).abs() / a.abs().max(1e-300));
        }
        if anchor_err > 1e-12 {
            return Err(format!("anchor dependence {anchor_err:.3e} > 1e-12"));
        }
        // An anchor on the next branch rescales P by the exact global
        // gauge factor e^{−2θ·2πm}; check the ratio is that constant.
        let p_c = deformed_probability(&field, &params, 700).map_err(|e| e.to_string())?;
        let ratio0 = p_c.values()[0] / p_a.values()[0];
        let m = (ratio0.ln() / (-2.0 * params.theta() * std::f64::consts::TAU)).round();
        let expected = (-2.0 * params.theta() * std::f64::consts::TAU * m).exp();
        let mut gauge_err = (ratio0 - expected).abs() / expected;
        for (a, c) in p_a.values().iter().zip(p_c.values()) {
            gauge_err = gauge_err.max((c / a - expected).abs() / expected);
        }
        if m == 0.0 || gauge_err > 1e-12 {
            return Err(format!(
                "cross-branch anchor gauge factor off: m = {m}, deviation {gauge_err:.3e}"
            ));
        }

        // Positivity.
        if p_a.values().iter().any(|&v| v < 0.0) {
            return Err("deformed probability went negative".into());
        }

        // Analysis invariances on a real two-packet pattern.
        let options = AnalysisOptions::default();
        let scen_params = DeformationParams::new(1.0, 0.03).map_err(|e| e.to_string())?;
        let (pattern, records) =
            run_scenario(&ScenarioSpec::five_fringes(0.2), &scen_params, None, &options)
                .map_err(|e| e.to_string())?;
        let rec = records
            .iter()
            .min_by(|a, b| a.x_peak.abs().total_cmp(&b.x_peak.abs()))
            .ok_or("no central record")?;
        let (_, _, s0) = local_moments(&pattern, rec.x_peak, rec.window).map_err(|e| e.to_string())?;

        let scaled = pattern.scaled(7.0);
        let (_, _, s_scaled) =
            local_moments(&scaled, rec.x_peak, rec.window).map_err(|e| e.to_string())?;
        if (s_scaled - s0).abs() > 1e-10 {
            return Err(format!("scale variance {0:.3e} > 1e-10", (s_scaled - s0).abs()));
        }

        let shift = 1.2345;
        let shifted = pattern.translated(shift);
        let (_, _, s_shift) = local_moments(
            &shifted,
            rec.x_peak + shift,
            (rec.window.0 + shift, rec.window.1 + shift),
        )
        .map_err(|e| e.to_string())?;
        if (s_shift - s0).abs() > 1e-10 {
            return Err(format!("translation variance {0:.3e} > 1e-10", (s_shift - s0).abs()));
        }

        let mirrored = pattern.mirrored();
        let x_mirror = pattern.x0() + pattern.x0() + (pattern.len() - 1) as f64 * pattern.dx()
            - rec.x_peak;
        let (_, _, s_mirror) = local_moments(
            &mirrored,
            x_mirror,
            (
                pattern.x0() + pattern.x0() + (pattern.len() - 1) as f64 * pattern.dx() - rec.window.1,
                pattern.x0() + pattern.x0() + (pattern.len() - 1) as f64 * pattern.dx() - rec.window.0,
            ),
        )
        .map_err(|e| e.to_string())?;
        if (s_mirror + s0).abs() > 1e-10 {
            return Err(format!("parity variance {0:.3e} > 1e-10", (s_mirror + s0).abs()));
        }

        Ok(format!(
            "round trip {rt_err:.1e}, anchor {anchor_err:.1e}, scale/translation/parity within 1e-10"
        ))
    };
    outcome(11, name, run())
}
