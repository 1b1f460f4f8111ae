//! Split-step spectral propagation of the complex-κ Schrödinger equation
//! iκ∂ₜψ = −(κ²/2m)∇²ψ + Vψ, plus residual diagnostics for the continuity
//! and modified Hamilton–Jacobi equations.
//!
//! The dynamics is defined by the linear equation alone; the phase-amplitude
//! equations are treated as measured diagnostics. For complex κ the exact
//! phase-amplitude split obeys a continuity equation with an extra source
//! term −(2·Im κ/m)·R∇²R; [`continuity_residual`] returns both sides so
//! callers can test the identity directly.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;
use thiserror::Error;

use crate::born::{decompose_eps, BornError, DEFAULT_ZERO_EPS};
use crate::field::{FieldError, WaveField};
use crate::numeric::{gradient_periodic, laplacian_periodic};
use crate::params::DeformationParams;

/// Growth factor over the initial max amplitude beyond which evolution aborts.
pub const OVERFLOW_GUARD: f64 = 1e15;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Born(#[from] BornError),
    #[error("potential length {0} does not match field length {1}")]
    PotentialMismatch(usize, usize),
    #[error("unstable configuration: dt·max|V|/re_kappa = {0} must be < 0.1")]
    UnstableConfig(f64),
    #[error("invalid solver parameter: {0}")]
    InvalidConfig(&'static str),
    #[error("instability: |ψ| grew beyond {OVERFLOW_GUARD}x the initial maximum at step {0}")]
    Instability(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Periodic,
    /// Absorbing cos²-ramp of the given width (length units) and strength
    /// (inverse time units) at both grid edges.
    AbsorbingRamp { width: f64, strength: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mass: f64,
    pub potential: Vec<f64>,
    pub dt: f64,
    pub n_steps: usize,
    pub boundary: Boundary,
    /// Steps between norm-trace samples.
    pub trace_stride: usize,
    /// When set, residual diagnostics are sampled every `trace_stride` steps.
    pub record_residuals: bool,
}

impl SolverConfig {
    pub fn free(mass: f64, n: usize, dt: f64, n_steps: usize) -> Self {
        Self {
            mass,
            potential: vec![0.0; n],
            dt,
            n_steps,
            boundary: Boundary::Periodic,
            trace_stride: n_steps.max(1),
            record_residuals: false,
        }
    }

    fn validate(&self, field_len: usize, params: &DeformationParams) -> Result<(), SolverError> {
        if !(self.mass > 0.0) {
            return Err(SolverError::InvalidConfig("mass must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SolverError::InvalidConfig("dt must be positive"));
        }
        if self.n_steps == 0 {
            return Err(SolverError::InvalidConfig("n_steps must be positive"));
        }
        if self.trace_stride == 0 {
            return Err(SolverError::InvalidConfig("trace_stride must be positive"));
        }
        if self.potential.len() != field_len {
            return Err(SolverError::PotentialMismatch(self.potential.len(), field_len));
        }
        let vmax = self.potential.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let guard = self.dt * vmax / params.re_kappa();
        if guard >= 0.1 {
            return Err(SolverError::UnstableConfig(guard));
        }
        Ok(())
    }
}

/// One norm-trace sample: time, ∫|ψ|²dx, and the deformed norm ∫R²dx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub born_norm: f64,
    pub deformed_norm: f64,
}

/// Residual diagnostic norms sampled during evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub t: f64,
    pub continuity_l2: f64,
    pub continuity_minus_diffusion_l2: f64,
    pub hj_real_l2: f64,
    pub hj_imag_l2: f64,
}

#[derive(Debug, Clone)]
pub struct EvolutionReport {
    pub final_field: WaveField,
    pub norm_trace: Vec<NormSample>,
    pub residual_trace: Option<Vec<ResidualSample>>,
}

/// Strang-split spectral stepper. Kept around so repeated evolutions on the
/// same grid reuse the FFT plan.
pub struct SplitStepper {
    n: usize,
    padded: usize,
    dx: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    kinetic: Vec<Complex64>,
    half_potential: Vec<Complex64>,
    absorber: Option<Vec<f64>>,
}

impl SplitStepper {
    pub fn new(cfg: &SolverConfig, params: &DeformationParams, n: usize, x0: f64, dx: f64) -> Self {
        let padded = n.next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);
        let kappa = params.kappa();
        let mass = cfg.mass;
        let dt = cfg.dt;
        // exp(−i·κ·k²·dt/(2m)) per wavenumber.
        let kinetic: Vec<Complex64> = (0..padded)
            .map(|j| {
                let j_signed = if j <= padded / 2 { j as f64 } else { j as f64 - padded as f64 };
                let k = 2.0 * std::f64::consts::PI * j_signed / (padded as f64 * dx);
                (-Complex64::i() * kappa * k * k * dt / (2.0 * mass)).exp()
            })
            .collect();
        // exp(−i·V·dt/(2κ)) per grid point; −i/κ = −(θ+i)/(re_kappa(1+θ²)).
        let neg_i_over_kappa = -Complex64::new(params.theta(), 1.0) / params.phase_to_action();
        let half_potential: Vec<Complex64> = (0..padded)
            .map(|k| {
                let v = if k < n { cfg.potential[k] } else { 0.0 };
                (neg_i_over_kappa * v * dt / 2.0).exp()
            })
            .collect();
        let absorber = match cfg.boundary {
            Boundary::Periodic => None,
            Boundary::AbsorbingRamp { width, strength } => {
                let ramp: Vec<f64> = (0..padded)
                    .map(|k| {
                        let x = x0 + k as f64 * dx;
                        let x_lo = x0;
                        let x_hi = x0 + (padded - 1) as f64 * dx;
                        let d = (x - x_lo).min(x_hi - x);
                        if d >= width {
                            1.0
                        } else {
                            let w = (0.5 * std::f64::consts::PI * (1.0 - d / width)).cos();
                            (-strength * dt * (1.0 - w * w).sqrt().powi(2)).exp()
                        }
                    })
                    .collect();
                Some(ramp)
            }
        };
        Self { n, padded, dx, forward, inverse, kinetic, half_potential, absorber }
    }

    /// One Strang step in place on a padded buffer.
    pub fn step(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.padded);
        for (b, f) in buf.iter_mut().zip(&self.half_potential) {
            *b *= f;
        }
        self.forward.process(buf);
        for (b, f) in buf.iter_mut().zip(&self.kinetic) {
            *b *= f;
        }
        self.inverse.process(buf);
        let scale = 1.0 / self.padded as f64;
        for b in buf.iter_mut() {
            *b *= scale;
        }
        for (b, f) in buf.iter_mut().zip(&self.half_potential) {
            *b *= f;
        }
        if let Some(ramp) = &self.absorber {
            for (b, r) in buf.iter_mut().zip(ramp) {
                *b *= *r;
            }
        }
    }

    pub fn pad(&self, field: &WaveField) -> Vec<Complex64> {
        let mut buf = vec![Complex64::default(); self.padded];
        buf[..self.n].copy_from_slice(field.samples());
        buf
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
}

/// Evolve `initial` for `cfg.n_steps` Strang steps. Linearity of the scheme
/// is exact; complex κ injects genuine exponential growth at high
/// wavenumbers, so growth beyond [`OVERFLOW_GUARD`]× the initial maximum
/// aborts with `Instability`.
pub fn evolve(
    initial: &WaveField,
    cfg: &SolverConfig,
    params: &DeformationParams,
) -> Result<EvolutionReport, SolverError> {
    cfg.validate(initial.len(), params)?;
    let stepper = SplitStepper::new(cfg, params, initial.len(), initial.x0(), initial.dx());
    let mut buf = stepper.pad(initial);
    let guard = OVERFLOW_GUARD * initial.max_abs().max(f64::MIN_POSITIVE);

    let snapshot = |buf: &[Complex64]| -> Result<WaveField, SolverError> {
        Ok(WaveField::new(buf[..initial.len()].to_vec(), initial.x0(), initial.dx())?)
    };

    let mut norm_trace = Vec::new();
    let mut residual_trace = if cfg.record_residuals { Some(Vec::new()) } else { None };
    norm_trace.push(norm_sample(0.0, &snapshot(&buf)?, params)?);

    let mut prev_snapshot: Option<(f64, WaveField)> = None;
    for step in 1..=cfg.n_steps {
        stepper.step(&mut buf);
        let t = step as f64 * cfg.dt;
        if step % cfg.trace_stride == 0 || step == cfg.n_steps {
            // NaN-safe: f64::max would silently drop NaNs.
            let mut max = 0.0f64;
            let mut finite = true;
            for c in buf.iter() {
                let m = c.norm_sqr();
                finite &= m.is_finite();
                if m > max {
                    max = m;
                }
            }
            if !finite || max.sqrt() > guard {
                return Err(SolverError::Instability(step));
            }
            let field = snapshot(&buf)?;
            norm_trace.push(norm_sample(t, &field, params)?);
            if let Some(trace) = residual_trace.as_mut() {
                if let Some((t_prev, f_prev)) = prev_snapshot.take() {
                    let dt_pair = t - t_prev;
                    let cont = continuity_residual(&f_prev, &field, dt_pair, cfg, params)?;
                    let hj = hj_residual(&f_prev, &field, dt_pair, cfg, params)?;
                    let dx = field.dx();
                    let diff_l2 = masked_l2(&cont.residual, &cont.mask, dx);
                    let mismatch: Vec<f64> = cont
                        .residual
                        .iter()
                        .zip(&cont.diffusion)
                        .map(|(r, d)| r - d)
                        .collect();
                    trace.push(ResidualSample {
                        t,
                        continuity_l2: diff_l2,
                        continuity_minus_diffusion_l2: masked_l2(&mismatch, &cont.mask, dx),
                        hj_real_l2: hj.real_l2,
                        hj_imag_l2: hj.imag_l2,
                    });
                }
                prev_snapshot = Some((t, snapshot(&buf)?));
            }
        }
    }
    Ok(EvolutionReport { final_field: snapshot(&buf)?, norm_trace, residual_trace })
}

fn norm_sample(t: f64, field: &WaveField, params: &DeformationParams) -> Result<NormSample, SolverError> {
    // Rectangle sums: on the periodic grid this is the quantity the unitary
    // θ = 0 stepper conserves exactly (Parseval); the trapezoid rule would
    // double-weight the wrap point and drift as mass crosses the boundary.
    let born_norm = field.samples().iter().map(|c| c.norm_sqr()).sum::<f64>() * field.dx();
    // ∫R² dx via the deformed rule, anchored at the amplitude maximum so the
    // anchor never lands on a node.
    let anchor = argmax_abs(field);
    let deformed = crate::born::deformed_probability_eps(field, params, anchor, DEFAULT_ZERO_EPS)?;
    let deformed_norm = deformed.values().iter().sum::<f64>() * field.dx();
    Ok(NormSample { t, born_norm, deformed_norm })
}

fn argmax_abs(field: &WaveField) -> usize {
    field
        .samples()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// exp(−iEt/κ) with complex E and κ.
pub fn eigen_time_dependence(energy: Complex64, t: f64, params: &DeformationParams) -> Complex64 {
    (-Complex64::i() * energy * t / params.kappa()).exp()
}

/// Continuity diagnostics from two consecutive snapshots: the left side
/// ∂ₜ(R²) + ∇·(R²∇S/m) evaluated at the midpoint, and the companion source
/// −(2·Im κ/m)·R∇²R the exact phase-amplitude split predicts for complex κ.
#[derive(Debug, Clone)]
pub struct ContinuityDiagnostics {
    pub residual: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub mask: Vec<bool>,
}

/// Anchored decomposition of the two snapshots with temporal phase
/// continuity at the anchor (a principal-branch jump between snapshots
/// would otherwise rescale ρ by e^{4πθ}).
fn paired_decomposition(
    field_t: &WaveField,
    field_t_plus: &WaveField,
    params: &DeformationParams,
) -> Result<(crate::field::PhaseAmplitudeField, crate::field::PhaseAmplitudeField), SolverError> {
    let anchor = argmax_abs(field_t);
    let pa_t = decompose_eps(field_t, params, anchor, DEFAULT_ZERO_EPS)?;
    let pa_tp = decompose_eps(field_t_plus, params, anchor, DEFAULT_ZERO_EPS)?;
    let scale = params.phase_to_action();
    let wind = 2.0 * std::f64::consts::PI * scale;
    let jump = ((pa_t.action()[anchor] - pa_tp.action()[anchor]) / wind).round();
    if jump != 0.0 {
        let shift = jump * wind;
        let theta = params.theta();
        let amp_fix = (theta * shift / scale).exp();
        let amplitude = pa_tp.amplitude().iter().map(|&r| r / amp_fix).collect();
        let action = pa_tp.action().iter().map(|&s| s + shift).collect();
        let fixed = crate::field::PhaseAmplitudeField::new(
            amplitude,
            action,
            pa_tp.mask().to_vec(),
            pa_tp.x0(),
            pa_tp.dx(),
            std::f64::consts::PI * scale * (1.0 + 1e-9),
        )?;
        return Ok((pa_t, fixed));
    }
    Ok((pa_t, pa_tp))
}

/// Gradient of an unwrapped action field that may wind: for periodic ψ the
/// action is periodic plus an integer number of 2π·scale ramps across the
/// domain. Differentiating that ramp with a periodic stencil would smear a
/// huge wrap jump over the edge points, so split it off, differentiate the
/// periodic remainder, and add the constant slope back.
fn action_gradient(s: &[f64], dx: f64, scale: f64) -> Vec<f64> {
    let n = s.len();
    let wrap = 2.0 * std::f64::consts::PI * scale;
    // Linear extrapolation one step past the end estimates s(x0 + n·dx),
    // which must match s[0] modulo the wrap quantum.
    let extrapolated = 2.0 * s[n - 1] - s[n - 2];
    let w = ((extrapolated - s[0]) / wrap).round();
    if w == 0.0 {
        return gradient_periodic(s, dx);
    }
    let slope = w * wrap / (n as f64 * dx);
    let periodic: Vec<f64> = s.iter().enumerate().map(|(k, &v)| v - slope * k as f64 * dx).collect();
    let mut g = gradient_periodic(&periodic, dx);
    for v in g.iter_mut() {
        *v += slope;
    }
    g
}

pub fn continuity_residual(
    field_t: &WaveField,
    field_t_plus: &WaveField,
    dt: f64,
    cfg: &SolverConfig,
    params: &DeformationParams,
) -> Result<ContinuityDiagnostics, SolverError> {
    let (pa_t, pa_tp) = paired_decomposition(field_t, field_t_plus, params)?;
    let n = pa_t.len();
    let dx = field_t.dx();
    let mass = cfg.mass;

    let rho_t: Vec<f64> = pa_t.amplitude().iter().map(|r| r * r).collect();
    let rho_tp: Vec<f64> = pa_tp.amplitude().iter().map(|r| r * r).collect();
    let r_mid: Vec<f64> = pa_t
        .amplitude()
        .iter()
        .zip(pa_tp.amplitude())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let s_mid: Vec<f64> = pa_t.action().iter().zip(pa_tp.action()).map(|(a, b)| 0.5 * (a + b)).collect();

    let grad_s = action_gradient(&s_mid, dx, params.phase_to_action());
    let flux: Vec<f64> = (0..n).map(|k| 0.5 * (rho_t[k] + rho_tp[k]) * grad_s[k] / mass).collect();
    let div_flux = gradient_periodic(&flux, dx);
    let lap_r = laplacian_periodic(&r_mid, dx);

    let im_kappa = params.im_kappa();
    let residual: Vec<f64> = (0..n).map(|k| (rho_tp[k] - rho_t[k]) / dt + div_flux[k]).collect();
    let diffusion: Vec<f64> = (0..n).map(|k| -(2.0 * im_kappa / mass) * r_mid[k] * lap_r[k]).collect();
    let mask: Vec<bool> = pa_t.mask().iter().zip(pa_tp.mask()).map(|(a, b)| a | b).collect();
    Ok(ContinuityDiagnostics { residual, diffusion, mask })
}

/// L² norms of the real and imaginary parts of the modified Hamilton–Jacobi
/// residual ∂ₜS + (∇S)²/2m + V + Q[R], with complex Q = −κ²∇²R/(2mR).
/// Report-only diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct HjResidual {
    pub real_l2: f64,
    pub imag_l2: f64,
}

pub fn hj_residual(
    field_t: &WaveField,
    field_t_plus: &WaveField,
    dt: f64,
    cfg: &SolverConfig,
    params: &DeformationParams,
) -> Result<HjResidual, SolverError> {
    let (pa_t, pa_tp) = paired_decomposition(field_t, field_t_plus, params)?;
    let n = pa_t.len();
    let dx = field_t.dx();
    let mass = cfg.mass;
    let kappa2 = params.kappa() * params.kappa();

    let r_mid: Vec<f64> = pa_t
        .amplitude()
        .iter()
        .zip(pa_tp.amplitude())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let s_mid: Vec<f64> = pa_t.action().iter().zip(pa_tp.action()).map(|(a, b)| 0.5 * (a + b)).collect();
    let grad_s = action_gradient(&s_mid, dx, params.phase_to_action());
    let lap_r = laplacian_periodic(&r_mid, dx);

    let r_floor = DEFAULT_ZERO_EPS * r_mid.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut real = vec![0.0; n];
    let mut imag = vec![0.0; n];
    let mut mask = vec![false; n];
    for k in 0..n {
        if pa_t.mask()[k] || pa_tp.mask()[k] || r_mid[k] <= r_floor {
            mask[k] = true;
            continue;
        }
        let dt_s = (pa_tp.action()[k] - pa_t.action()[k]) / dt;
        let q = -kappa2 * lap_r[k] / (2.0 * mass * r_mid[k]);
        let classical = dt_s + grad_s[k] * grad_s[k] / (2.0 * mass) + cfg.potential[k];
        real[k] = classical + q.re;
        imag[k] = q.im;
    }
    Ok(HjResidual {
        real_l2: masked_l2(&real, &mask, dx),
        imag_l2: masked_l2(&imag, &mask, dx),
    })
}

fn masked_l2(values: &[f64], mask: &[bool], dx: f64) -> f64 {
    let sum: f64 = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .map(|(v, _)| v * v)
        .sum();
    (sum * dx).sqrt()
}

/// Apply the discrete Hamiltonian Ĥψ = −(κ²/2m)∇²ψ + Vψ with the spectral
/// Laplacian on the (power-of-two) grid.
pub fn apply_hamiltonian(
    field: &WaveField,
    cfg: &SolverConfig,
    params: &DeformationParams,
) -> Result<WaveField, SolverError> {
    let n = field.len();
    if !n.is_power_of_two() {
        return Err(SolverError::InvalidConfig("apply_hamiltonian needs a power-of-two grid"));
    }
    if cfg.potential.len() != n {
        return Err(SolverError::PotentialMismatch(cfg.potential.len(), n));
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf = field.samples().to_vec();
    forward.process(&mut buf);
    let kappa2 = params.kappa() * params.kappa();
    for (j, b) in buf.iter_mut().enumerate() {
        let j_signed = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
        let k = 2.0 * std::f64::consts::PI * j_signed / (n as f64 * field.dx());
        *b *= kappa2 * k * k / (2.0 * cfg.mass);
    }
    inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    for (b, (&v, s)) in buf.iter_mut().zip(cfg.potential.iter().zip(field.samples())) {
        *b = *b * scale + v * s;
    }
    Ok(WaveField::new(buf, field.x0(), field.dx())?)
}

/// Analytic harmonic ground state for V = ½mω²x²: ψ(x) = exp(−mωx²/(2κ))
/// with eigenvalue E = κω/2. Direct substitution into Ĥψ verifies both.
pub fn harmonic_ground_state(
    n: usize,
    x0: f64,
    dx: f64,
    mass: f64,
    omega: f64,
    params: &DeformationParams,
) -> Result<(WaveField, Complex64), SolverError> {
    if !(mass > 0.0 && omega > 0.0) {
        return Err(SolverError::InvalidConfig("mass and omega must be positive"));
    }
    let kappa = params.kappa();
    let field = WaveField::from_fn(n, x0, dx, |x| (-mass * omega * x * x / (2.0 * kappa)).exp())?;
    Ok((field, kappa * omega / 2.0))
}

/// Ground state of Ĥ by power iteration with the smoothing operator
/// exp(−τĤ) (Strang-split). The returned energy is the bilinear Rayleigh
/// quotient ∫ψ·(Ĥψ)dx / ∫ψ²dx of the exact discrete Ĥ, which is the right
/// pairing for the complex-symmetric operator.
pub fn power_iteration_ground_state(
    initial: &WaveField,
    cfg: &SolverConfig,
    params: &DeformationParams,
    tau: f64,
    iterations: usize,
) -> Result<(WaveField, Complex64), SolverError> {
    let smoother_cfg = SolverConfig { dt: tau, n_steps: 1, ..cfg.clone() };
    let kappa = params.kappa();
    // exp(−τĤ) is the evolution operator over imaginary step: formally
    // dt = −iτκ in the unitary factors; build it directly instead.
    let n = initial.len();
    if !n.is_power_of_two() {
        return Err(SolverError::InvalidConfig("power iteration needs a power-of-two grid"));
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let kinetic: Vec<Complex64> = (0..n)
        .map(|j| {
            let j_signed = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let k = 2.0 * std::f64::consts::PI * j_signed / (n as f64 * initial.dx());
            (-tau * kappa * kappa * k * k / (2.0 * cfg.mass)).exp()
        })
        .collect();
    let half_pot: Vec<Complex64> = cfg
        .potential
        .iter()
        .map(|&v| Complex64::from(-tau * v / 2.0).exp())
        .collect();

    let mut buf = initial.samples().to_vec();
    for _ in 0..iterations {
        for (b, f) in buf.iter_mut().zip(&half_pot) {
            *b *= f;
        }
        forward.process(&mut buf);
        for (b, f) in buf.iter_mut().zip(&kinetic) {
            *b *= f;
        }
        inverse.process(&mut buf);
        let norm: f64 = buf.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let scale = 1.0 / (n as f64 * norm / (n as f64).sqrt());
        for b in buf.iter_mut() {
            *b *= scale;
        }
        for (b, f) in buf.iter_mut().zip(&half_pot) {
            *b *= f;
        }
    }
    let state = WaveField::new(buf, initial.x0(), initial.dx())?;
    let h_psi = apply_hamiltonian(&state, &smoother_cfg, params)?;
    let mut num = Complex64::default();
    let mut den = Complex64::default();
    for (s, h) in state.samples().iter().zip(h_psi.samples()) {
        num += s * h;
        den += s * s;
    }
    Ok((state, num / den))
}
