//! Experiment configuration documents (TOML).
//!
//! Decoding is two-stage: the `suite` key picks the document schema, then the
//! whole document is decoded against that schema with unknown keys rejected,
//! so errors keep their line and key context.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diagnostics::DEFAULT_UI_EPSILON;
use crate::error::{Error, Result};
use crate::mc::MCConfig;
use crate::model::{Coupling, DynamicLQGSpec, TeamSpec};
use crate::riccati::RiccatiConfig;
use crate::solver::FixedPointConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Ex1StateCoupled,
    Ex2Nongaussian,
    Ex3ControlCoupled,
    Ex4Asymmetric,
    Ex5LqgClassical,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Ex1StateCoupled,
        Suite::Ex2Nongaussian,
        Suite::Ex3ControlCoupled,
        Suite::Ex4Asymmetric,
        Suite::Ex5LqgClassical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ex1StateCoupled => "ex1_state_coupled",
            Suite::Ex2Nongaussian => "ex2_nongaussian",
            Suite::Ex3ControlCoupled => "ex3_control_coupled",
            Suite::Ex4Asymmetric => "ex4_asymmetric",
            Suite::Ex5LqgClassical => "ex5_lqg_classical",
        }
    }

    pub fn valid_names() -> String {
        Suite::ALL.map(Suite::name).join(", ")
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'; valid suites: {}", Suite::valid_names())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaritySettings {
    pub ns: Vec<usize>,
    pub samples: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_inner")]
    pub inner_samples: usize,
}

fn default_fd_step() -> f64 {
    1e-4
}

fn default_inner() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakConvergenceSettings {
    pub ns: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_reference_draws")]
    pub reference_draws: usize,
}

fn default_reference_draws() -> usize {
    crate::mc::REFERENCE_DRAWS
}

/// Extra per-DM weights `α_k` on the first `M` actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetricSettings {
    #[serde(with = "crate::matrix_serde::vec")]
    pub weights: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticConfig {
    pub suite: Suite,
    pub ns: Vec<usize>,
    pub spec: TeamSpec,
    #[serde(default)]
    pub mc: MCConfig,
    #[serde(default)]
    pub solver: FixedPointConfig,
    #[serde(default = "default_ui_epsilon")]
    pub ui_epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<StationaritySettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_convergence: Option<WeakConvergenceSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymmetric: Option<AsymmetricSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_ui_epsilon() -> f64 {
    DEFAULT_UI_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqgConfig {
    pub suite: Suite,
    pub ts: Vec<usize>,
    pub spec: DynamicLQGSpec,
    #[serde(default)]
    pub riccati: RiccatiConfig,
    /// Monte Carlo cross-check of the exact average cost at the first horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<MCConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentConfig {
    Static(StaticConfig),
    Lqg(LqgConfig),
}

#[derive(Deserialize)]
struct Head {
    suite: Option<String>,
}

impl ExperimentConfig {
    pub fn suite(&self) -> Suite {
        match self {
            ExperimentConfig::Static(c) => c.suite,
            ExperimentConfig::Lqg(c) => c.suite,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let head: Head = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let suite: Suite = head
            .suite
            .ok_or_else(|| Error::Config(format!("missing key 'suite'; valid suites: {}", Suite::valid_names())))?
            .parse()?;
        let cfg = match suite {
            Suite::Ex5LqgClassical => {
                ExperimentConfig::Lqg(toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?)
            }
            _ => ExperimentConfig::Static(toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        let out = match self {
            ExperimentConfig::Static(c) => toml::to_string(c),
            ExperimentConfig::Lqg(c) => toml::to_string(c),
        };
        out.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Static(c) => c.mc.seed = seed,
            ExperimentConfig::Lqg(c) => {
                if let Some(mc) = c.mc.as_mut() {
                    mc.seed = seed;
                }
            }
        }
    }

    pub fn set_samples(&mut self, samples: usize) {
        match self {
            ExperimentConfig::Static(c) => c.mc.samples = samples,
            ExperimentConfig::Lqg(c) => {
                if let Some(mc) = c.mc.as_mut() {
                    mc.samples = samples;
                }
            }
        }
    }

    pub fn output_path(&self) -> Option<&PathBuf> {
        match self {
            ExperimentConfig::Static(c) => c.output_path.as_ref(),
            ExperimentConfig::Lqg(c) => c.output_path.as_ref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        match self {
            ExperimentConfig::Static(c) => {
                schedule("ns", &c.ns, &mut problems);
                if let Err(Error::InvalidSpec(v)) = c.spec.ensure_valid() {
                    problems.extend(v.into_iter().map(|m| format!("spec: {m}")));
                }
                if c.mc.samples == 0 {
                    problems.push("mc.samples must be ≥ 1".into());
                }
                if !(c.ui_epsilon > 0.0) {
                    problems.push("ui_epsilon must be > 0".into());
                }
                if !(c.solver.tol > 0.0) || c.solver.max_iter == 0 {
                    problems.push("solver.tol must be > 0 and solver.max_iter ≥ 1".into());
                }
                let want = match c.suite {
                    Suite::Ex1StateCoupled | Suite::Ex2Nongaussian => Coupling::StateCoupled,
                    _ => Coupling::ControlCoupled,
                };
                if c.spec.coupling != want {
                    problems.push(format!("suite {} needs spec.coupling = {want:?}", c.suite));
                }
                if c.suite == Suite::Ex1StateCoupled && !c.spec.is_gaussian() {
                    problems.push("suite ex1_state_coupled needs Gaussian laws (use ex2_nongaussian)".into());
                }
                match (&c.asymmetric, c.suite) {
                    (None, Suite::Ex4Asymmetric) => problems.push("suite ex4_asymmetric needs [asymmetric]".into()),
                    (Some(_), s) if s != Suite::Ex4Asymmetric => {
                        problems.push("[asymmetric] only applies to ex4_asymmetric".into())
                    }
                    (Some(a), _) => {
                        let d = c.spec.action_dim;
                        if a.weights.is_empty() || a.weights.iter().any(|w| w.shape() != (d, d)) {
                            problems.push(format!("asymmetric.weights must be nonempty {d}×{d} matrices"));
                        }
                        if a.weights.len() > c.ns[0].max(1) {
                            problems.push("more asymmetric weights than DMs at the smallest N".into());
                        }
                    }
                    _ => {}
                }
                if let Some(s) = &c.stationarity {
                    schedule("stationarity.ns", &s.ns, &mut problems);
                    if s.samples < 2 || !(s.fd_step > 0.0) || s.inner_samples == 0 {
                        problems.push("stationarity needs samples ≥ 2, fd_step > 0, inner_samples ≥ 1".into());
                    }
                }
                if let Some(w) = &c.weak_convergence {
                    schedule("weak_convergence.ns", &w.ns, &mut problems);
                    if w.replicates == 0 || w.reference_draws == 0 {
                        problems.push("weak_convergence needs replicates and reference_draws ≥ 1".into());
                    }
                }
            }
            ExperimentConfig::Lqg(c) => {
                schedule("ts", &c.ts, &mut problems);
                if let Err(Error::InvalidSpec(v)) = c.spec.ensure_valid() {
                    problems.extend(v.into_iter().map(|m| format!("spec: {m}")));
                }
                if c.suite != Suite::Ex5LqgClassical {
                    problems.push("a dynamic spec needs suite ex5_lqg_classical".into());
                }
                if let Some(mc) = &c.mc {
                    if mc.samples < 2 {
                        problems.push("mc.samples must be ≥ 2".into());
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// The shipped default configuration for `suite`.
pub fn default_config(suite: Suite) -> ExperimentConfig {
    let text = match suite {
        Suite::Ex1StateCoupled => include_str!("../../../configs/ex1_state_coupled.toml"),
        Suite::Ex2Nongaussian => include_str!("../../../configs/ex2_nongaussian.toml"),
        Suite::Ex3ControlCoupled => include_str!("../../../configs/ex3_control_coupled.toml"),
        Suite::Ex4Asymmetric => include_str!("../../../configs/ex4_asymmetric.toml"),
        Suite::Ex5LqgClassical => include_str!("../../../configs/ex5_lqg_classical.toml"),
    };
    ExperimentConfig::parse(text).expect("shipped configs are valid")
}

fn schedule(name: &str, values: &[usize], problems: &mut Vec<String>) {
    if values.is_empty() {
        problems.push(format!("{name} must be nonempty"));
    } else if values[0] == 0 || values.windows(2).any(|w| w[1] <= w[0]) {
        problems.push(format!("{name} must be positive and strictly increasing"));
    }
}
