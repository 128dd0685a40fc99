//! TOML experiment configuration. Unknown keys are rejected everywhere.

use std::path::Path;

use geoflow_core::poincare::ClassifyOptions;
use geoflow_core::shadowing::SearchBudget;
use geoflow_core::twist::{CircleOptions, ClimbOptions, TwistMapParams};
use geoflow_core::{FlowSettings, MetricSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Integrate,
    FindPeriodic,
    Classify,
    PerturbTrace,
    ChainTest,
    TwistDemo,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Integrate => "integrate",
            Self::FindPeriodic => "find-periodic",
            Self::Classify => "classify",
            Self::PerturbTrace => "perturb-trace",
            Self::ChainTest => "chain-test",
            Self::TwistDemo => "twist-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the command when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    /// Metric for every experiment except a twist demo without embedding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub flow: FlowSettings,
    /// Plot series to emit; all available series when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plots: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub find_periodic: Option<OrbitsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classify: Option<ClassifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb_trace: Option<PerturbConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain_test: Option<ChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub twist_demo: Option<TwistDemoConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub x: [f64; 2],
    pub p: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSeed {
    pub x: [f64; 2],
    pub p: [f64; 2],
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    /// Chart coordinate held fixed: 0 for `u`, 1 for `v`.
    pub coordinate: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub states: Vec<StateConfig>,
    /// Extra initial states drawn uniformly from the chart and unit circle.
    #[serde(default)]
    pub random_states: usize,
    pub t_end: f64,
    pub every: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<SectionConfig>,
    #[serde(default = "default_max_crossings")]
    pub max_crossings: usize,
}

fn default_max_crossings() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitsConfig {
    pub orbits: Vec<OrbitSeed>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub theta: f64,
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    pub orbits: Vec<OrbitSeed>,
    #[serde(default)]
    pub options: ClassifyOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeRange {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub orbit: OrbitSeed,
    pub bump: BumpConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<AmplitudeRange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMode {
    #[default]
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Vertex 0 of the underlying true orbit.
    pub start: StateConfig,
    pub first_index: i64,
    pub len: usize,
    pub segment_time: f64,
    /// Each interior vertex is displaced in `x` by a seeded uniform draw in `[-kick, kick]²`.
    #[serde(default)]
    pub kick: f64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub mode: ShadowMode,
    #[serde(default)]
    pub budget: SearchBudget,
}

fn default_horizon() -> f64 {
    8.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirclesConfig {
    /// Flat circles `r = const`; only meaningful for integrable maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_numbers: Option<Vec<f64>>,
    #[serde(default = "default_circle_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub options: CircleOptions,
}

fn default_circle_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordinateMapKind {
    SymplecticPolar,
    FlatShear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedConfig {
    pub orbit: OrbitSeed,
    pub coordinate_map: CoordinateMapKind,
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Integrator step for the return-time solves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

fn default_scale() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistDemoConfig {
    pub map: TwistMapParams,
    pub circles: CirclesConfig,
    /// `δ' = fraction · ε'`.
    #[serde(default = "default_fraction")]
    pub delta_prime_fraction: f64,
    #[serde(default)]
    pub climb: ClimbOptions,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_slack")]
    pub slack: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embed: Option<EmbedConfig>,
}

fn default_fraction() -> f64 {
    0.1
}

fn default_grid() -> usize {
    1024
}

fn default_slack() -> usize {
    geoflow_core::twist::DEFAULT_SLACK
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn seeds_ok(name: &str, seeds: &[OrbitSeed]) -> Result<(), CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config(format!("{name}: no orbits given")));
    }
    for (i, s) in seeds.iter().enumerate() {
        positive(&format!("{name}.orbits[{i}].period"), s.period)?;
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Schema checks that do not need any numerics.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), CliError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(CliError::Config(format!(
                    "config declares kind {} but the command is {}",
                    k.name(),
                    kind.name()
                )));
            }
        }
        self.flow.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let needs_metric = match kind {
            ExperimentKind::TwistDemo => self.twist_demo.as_ref().is_some_and(|t| t.embed.is_some()),
            _ => true,
        };
        if needs_metric && self.metric.is_none() {
            return Err(CliError::Config("missing [metric] table".into()));
        }
        let missing = || CliError::Config(format!("missing [{}] table", kind.name().replace('-', "_")));
        match kind {
            ExperimentKind::Integrate => {
                let c = self.integrate.as_ref().ok_or_else(missing)?;
                positive("integrate.t_end", c.t_end)?;
                positive("integrate.every", c.every)?;
                if c.states.is_empty() && c.random_states == 0 {
                    return Err(CliError::Config("integrate: no initial states".into()));
                }
                if c.section.is_some_and(|s| s.coordinate > 1) {
                    return Err(CliError::Config("integrate.section.coordinate must be 0 or 1".into()));
                }
            }
            ExperimentKind::FindPeriodic => seeds_ok("find_periodic", &self.find_periodic.as_ref().ok_or_else(missing)?.orbits)?,
            ExperimentKind::Classify => {
                let c = self.classify.as_ref().ok_or_else(missing)?;
                seeds_ok("classify", &c.orbits)?;
                positive("classify.options.sieve_tol", c.options.sieve_tol)?;
                positive("classify.options.band", c.options.band)?;
                if let Some(cert) = c.certify {
                    positive("classify.certify.theta", cert.theta)?;
                    positive("classify.certify.m", cert.m)?;
                }
            }
            ExperimentKind::PerturbTrace => {
                let c = self.perturb_trace.as_ref().ok_or_else(missing)?;
                seeds_ok("perturb_trace", std::slice::from_ref(&c.orbit))?;
                positive("perturb_trace.bump.radius", c.bump.radius)?;
                match (&c.amplitudes, &c.range) {
                    (Some(a), None) if !a.is_empty() => {}
                    (None, Some(r)) => {
                        positive("perturb_trace.range.step", r.step)?;
                        if !(r.from <= r.to) {
                            return Err(CliError::Config("perturb_trace.range needs from <= to".into()));
                        }
                    }
                    _ => {
                        return Err(CliError::Config(
                            "perturb_trace needs exactly one of `amplitudes` or `range`".into(),
                        ))
                    }
                }
            }
            ExperimentKind::ChainTest => {
                let c = self.chain_test.as_ref().ok_or_else(missing)?;
                positive("chain_test.segment_time", c.segment_time)?;
                positive("chain_test.delta", c.delta)?;
                positive("chain_test.epsilon", c.epsilon)?;
                positive("chain_test.horizon", c.horizon)?;
                if !(c.kick >= 0.0) {
                    return Err(CliError::Config("chain_test.kick must be >= 0".into()));
                }
                if c.len < 2 {
                    return Err(CliError::Config("chain_test.len must be at least 2".into()));
                }
                c.budget.validate().map_err(|e| CliError::Config(e.to_string()))?;
            }
            ExperimentKind::TwistDemo => {
                let c = self.twist_demo.as_ref().ok_or_else(missing)?;
                TwistMapParams::new(c.map.family, c.map.r_lo, c.map.r_hi)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                positive("twist_demo.delta_prime_fraction", c.delta_prime_fraction)?;
                positive("twist_demo.circles.tolerance", c.circles.tolerance)?;
                let n = match (&c.circles.radii, &c.circles.rotation_numbers) {
                    (Some(r), None) => r.len(),
                    (None, Some(r)) => r.len(),
                    _ => {
                        return Err(CliError::Config(
                            "twist_demo.circles needs exactly one of `radii` or `rotation_numbers`".into(),
                        ))
                    }
                };
                if n != 3 {
                    return Err(CliError::Config(format!("twist_demo needs three circles, got {n}")));
                }
                if c.grid == 0 {
                    return Err(CliError::Config("twist_demo.grid must be positive".into()));
                }
                if let Some(e) = c.embed {
                    seeds_ok("twist_demo.embed", std::slice::from_ref(&e.orbit))?;
                    positive("twist_demo.embed.scale", e.scale)?;
                    if let Some(h) = e.step {
                        positive("twist_demo.embed.step", h)?;
                    }
                }
            }
        }
        Ok(())
    }
}
