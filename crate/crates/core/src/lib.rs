//! Simulation and analysis toolkit for interference patterns under a
//! complex-κ (θ-deformed) wave equation: exact intensity construction,
//! closed-form first-order patterns, a split-step spectral solver, fringe
//! statistics, a noise pipeline, and the independent oracles that pin down
//! every derived constant shipped in `fixtures/derived.toml`.

pub mod acceptance;
pub mod analysis;
pub mod born;
pub mod field;
pub mod fixtures;
pub mod noise;
pub mod numeric;
pub mod oracle;
pub mod params;
pub mod pipeline;
pub mod solver;
pub mod twopath;

pub use analysis::{AnalysisError, AnalysisOptions, CalibrationTable, FringeRecord, ThetaEstimate};
pub use born::BornError;
pub use field::{FieldError, PhaseAmplitudeField, ProbabilityField, SignedField, WaveField};
pub use noise::{NoiseConfig, NoiseError};
pub use params::{DeformationParams, ParamsError};
pub use pipeline::{PipelineError, ScenarioSpec, SolverScenario};
pub use solver::{EvolutionReport, SolverConfig, SolverError};
pub use twopath::TwoPacketModel;
