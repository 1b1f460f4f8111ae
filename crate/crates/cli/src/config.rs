//! Strict TOML run configuration. Unknown keys are rejected, and physics
//! parameters (θ, re_kappa, solver mass) have no silent defaults.

use serde::Deserialize;

use fringe_core::{AnalysisOptions, DeformationParams, NoiseConfig, ScenarioSpec, SolverScenario};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub params: ParamsSection,
    pub model: ModelSection,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    AnalyticTwoPacket,
    SolverTwoPacket,
}

/// Deformation parameters; both fields are mandatory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub re_kappa: f64,
    pub theta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    pub imbalance_r: f64,
    #[serde(default = "default_fringe_rate")]
    pub fringe_rate: f64,
    pub envelope_sigma: Option<f64>,
}

fn default_n() -> usize {
    4401
}
fn default_x_min() -> f64 {
    -5.5 * std::f64::consts::PI
}
fn default_x_max() -> f64 {
    5.5 * std::f64::consts::PI
}
fn default_fringe_rate() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub packet_center: f64,
    pub packet_sigma: f64,
    pub momentum: f64,
    pub amplitude_1: f64,
    pub amplitude_2: f64,
    pub mass: f64,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub phase_jitter_sigma: f64,
    #[serde(default)]
    pub path_jitter_sigma: f64,
    #[serde(default)]
    pub psf_sigma: f64,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub events_per_shot: u64,
    #[serde(default)]
    pub seed: u64,
    /// Realization count for `null-test`.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_shots() -> u64 {
    1
}
fn default_realizations() -> usize {
    200
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub min_prominence: f64,
    /// Window half-width in phase units.
    pub sigma_max: f64,
    /// Cubic-fit half-width in phase units.
    pub fit_halfwidth: f64,
    pub remove_linear_background: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        Self {
            min_prominence: o.min_prominence,
            sigma_max: o.sigma_max,
            fit_halfwidth: o.fit_halfwidth,
            remove_linear_background: o.remove_linear_background,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub thetas: Vec<f64>,
    pub rs: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        // toml's error display names the offending key and its line/column.
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        DeformationParams::new(self.params.re_kappa, self.params.theta)
            .map_err(|e| format!("[params] invalid: {e}"))?;
        if !(self.model.x_max > self.model.x_min) {
            return Err("[model] x_max must exceed x_min".into());
        }
        if self.model.imbalance_r.abs() >= 1.0 {
            return Err("[model] imbalance_r must satisfy |r| < 1".into());
        }
        if self.run.mode == Mode::SolverTwoPacket && self.solver.is_none() {
            return Err("[solver] section is required in solver_two_packet mode".into());
        }
        if let Some(s) = &self.solver {
            if !(s.mass > 0.0) {
                return Err("[solver] mass must be positive".into());
            }
            if !(s.dt > 0.0) {
                return Err("[solver] dt must be positive".into());
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.thetas.is_empty() || sweep.rs.is_empty() {
                return Err("[sweep] axes must be nonempty".into());
            }
        }
        Ok(())
    }

    pub fn params(&self) -> DeformationParams {
        DeformationParams::new(self.params.re_kappa, self.params.theta)
            .expect("validated at parse time")
    }

    pub fn scenario(&self) -> ScenarioSpec {
        ScenarioSpec {
            n: self.model.n,
            x_min: self.model.x_min,
            x_max: self.model.x_max,
            imbalance_r: self.model.imbalance_r,
            fringe_rate: self.model.fringe_rate,
            envelope_sigma: self.model.envelope_sigma,
        }
    }

    pub fn solver_scenario(&self) -> Option<SolverScenario> {
        self.solver.as_ref().map(|s| SolverScenario {
            n: s.n,
            x_min: s.x_min,
            x_max: s.x_max,
            packet_center: s.packet_center,
            packet_sigma: s.packet_sigma,
            momentum: s.momentum,
            amplitude_1: s.amplitude_1,
            amplitude_2: s.amplitude_2,
            mass: s.mass,
            dt: s.dt,
            n_steps: s.n_steps,
        })
    }

    pub fn noise(&self, seed_override: Option<u64>) -> Option<NoiseConfig> {
        self.noise.as_ref().map(|n| NoiseConfig {
            phase_jitter_sigma: n.phase_jitter_sigma,
            path_jitter_sigma: n.path_jitter_sigma,
            psf_sigma: n.psf_sigma,
            shots: n.shots,
            events_per_shot: n.events_per_shot,
            seed: seed_override.unwrap_or(n.seed),
        })
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            min_prominence: self.analysis.min_prominence,
            sigma_max: self.analysis.sigma_max,
            fit_halfwidth: self.analysis.fit_halfwidth,
            remove_linear_background: self.analysis.remove_linear_background,
        }
    }
}
