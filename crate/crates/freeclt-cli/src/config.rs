//! Configuration schemas for the subcommands. Unknown keys are rejected
//! everywhere; numeric constraints are validated before any computation
//! starts, so a validation failure never leaves partial output.

use freeclt_core::freemoments::FamilyConfig;
use freeclt_core::matlin::CMatrix;
use freeclt_core::opmodel::ModelConfig;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub spec: SemicircularSpecConfig,
    pub b: CMatrix,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemicircularSpecConfig {
    pub m: usize,
    #[serde(default)]
    pub a0: Option<CMatrix>,
    pub coeffs: Vec<CMatrix>,
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainParamsConfig {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

impl Default for DomainParamsConfig {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            sigma: default_sigma(),
            c: default_c(),
            gamma: default_gamma(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub model: ModelConfig,
    pub n_list: Vec<u64>,
    pub grid: freeclt_core::cltlab::GridSpec,
    #[serde(default)]
    pub params: DomainParamsConfig,
    #[serde(default = "default_rate_tol")]
    pub tol: f64,
    #[serde(default = "default_jmax")]
    pub jmax: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub assertions: Option<RateAssertions>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateAssertions {
    /// Every transform difference must stay below this value.
    #[serde(default)]
    pub max_diff: Option<f64>,
    /// Scaled differences must not trend upward (last vs first three).
    #[serde(default)]
    pub bounded_scaled_trend: Option<bool>,
    /// Fitted slope must land in this closed interval.
    #[serde(default)]
    pub slope_range: Option<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyConfig {
    pub polynomial: String,
    pub family: FamilyConfig,
    pub n_list: Vec<u64>,
    pub z_grid: ZGrid,
    #[serde(default = "default_rate_tol")]
    pub tol: f64,
    #[serde(default)]
    pub r_exterior: Option<f64>,
    #[serde(default)]
    pub assertions: Option<RateAssertions>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZGrid {
    /// Real points log-spaced in `[start, stop]`.
    Ray { start: f64, stop: f64, count: usize },
    /// Explicit complex points.
    List { points: Vec<[f64; 2]> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub target: DensityTarget,
    pub xmin: f64,
    pub xmax: f64,
    pub points: usize,
    #[serde(default)]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub oracle: Option<String>,
    #[serde(default = "default_density_tol")]
    pub tol: f64,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityTarget {
    Semicircle { variance: f64 },
    Poly { polynomial: String, family: FamilyConfig },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckLinConfig {
    pub polynomial: String,
    pub d: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_check_size")]
    pub size: usize,
    #[serde(default)]
    pub pencil_override: Option<PencilOverride>,
    #[serde(default = "default_check_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PencilOverride {
    pub a0: CMatrix,
    pub coeffs: Vec<CMatrix>,
    pub degree: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub model: ModelConfig,
    pub n: u64,
    pub b: CMatrix,
    pub size: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_true")]
    pub compare_series: bool,
    #[serde(default = "default_rate_tol")]
    pub tol: f64,
    #[serde(default = "default_mc_jmax")]
    pub jmax: usize,
}

fn default_tol() -> f64 {
    1e-12
}
fn default_rate_tol() -> f64 {
    1e-11
}
fn default_density_tol() -> f64 {
    1e-11
}
fn default_max_iter() -> usize {
    10_000
}
fn default_theta() -> f64 {
    0.2
}
fn default_sigma() -> f64 {
    0.9
}
fn default_c() -> f64 {
    2.0
}
fn default_gamma() -> f64 {
    0.1
}
fn default_jmax() -> usize {
    48
}
fn default_mc_jmax() -> usize {
    96
}
fn default_trials() -> usize {
    100
}
fn default_check_size() -> usize {
    6
}
fn default_check_threshold() -> f64 {
    1e-10
}
fn default_true() -> bool {
    true
}
