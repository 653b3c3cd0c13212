//! Run configuration, read from a TOML file.
//!
//! ```toml
//! budget = 20.0
//!
//! [market]
//! s0 = 100.0
//! u = 2.0
//! d = 0.5
//! rho = 0.0
//! steps = 1
//! p_up = 0.5
//!
//! [signals]
//! type = "mortality"        # or "none", "chain"
//! death_probs = [0.2]
//!
//! [claim]
//! type = "unit_linked_call" # or "pure_endowment", "table"
//! strike = 100.0
//!
//! [verify.oracle]
//! grid_points = 11
//! refine_rounds = 1
//!
//! [verify.monte_carlo]
//! n_sims = 100000
//! seed = 42
//!
//! [outputs]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Result;
use crate::lattice::{LatticeParams, DEFAULT_MAX_STEPS};
use crate::oracle::{McConfig, OracleConfig};
use crate::scenario::DEFAULT_MAX_SCENARIOS;
use crate::signals::{mortality_model, SignalModel, DEFAULT_MAX_SIGNAL_PATHS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", match line {
        Some(l) => format!("line {l}: {message}"),
        None => message.clone(),
    })]
    Parse { line: Option<usize>, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Initial capital available for hedging.
    pub budget: f64,
    pub market: LatticeParams,
    pub signals: SignalSpec,
    pub claim: ClaimSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub limits: Limits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    None,
    Mortality {
        death_probs: Vec<f64>,
        /// Observation steps; defaults to `1..=death_probs.len()`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        times: Option<Vec<usize>>,
    },
    Chain {
        times: Vec<usize>,
        states: Vec<Vec<String>>,
        initial: Vec<f64>,
        #[serde(default)]
        transitions: Vec<Vec<Vec<f64>>>,
    },
}

impl SignalSpec {
    pub fn build(&self) -> Result<SignalModel> {
        match self {
            SignalSpec::None => Ok(SignalModel::none()),
            SignalSpec::Mortality { death_probs, times } => {
                let model = mortality_model(death_probs.len(), death_probs)?;
                match times {
                    Some(t) => model.at_times(t.clone()),
                    None => Ok(model),
                }
            }
            SignalSpec::Chain {
                times,
                states,
                initial,
                transitions,
            } => SignalModel::new(times.clone(), states.clone(), initial.clone(), transitions.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClaimSpec {
    UnitLinkedCall { strike: f64 },
    PureEndowment { benefit: f64 },
    /// CSV table; relative paths resolve against the config file's directory.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub max_steps: usize,
    pub max_signal_paths: usize,
    pub max_scenarios: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            max_signal_paths: DEFAULT_MAX_SIGNAL_PATHS,
            max_scenarios: DEFAULT_MAX_SCENARIOS,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> std::result::Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_STEP_CALL: &str = r#"
budget = 20.0

[market]
s0 = 100.0
u = 2.0
d = 0.5
rho = 0.0
steps = 1
p_up = 0.5

[signals]
type = "mortality"
death_probs = [0.2]

[claim]
type = "unit_linked_call"
strike = 100.0

[verify.oracle]
grid_points = 11
refine_rounds = 1

[verify.monte_carlo]
n_sims = 1000
seed = 3
"#;

    #[test]
    fn parses_example() {
        let cfg = RunConfig::from_toml_str(ONE_STEP_CALL).unwrap();
        assert_eq!(cfg.budget, 20.0);
        assert_eq!(cfg.market.steps, 1);
        assert_eq!(cfg.claim, ClaimSpec::UnitLinkedCall { strike: 100.0 });
        assert_eq!(cfg.verify.unwrap().oracle.unwrap().max_combinations, 4096);
        assert_eq!(cfg.outputs.dir, PathBuf::from("out"));
        assert_eq!(cfg.limits, Limits::default());
        let model = cfg.signals.build().unwrap();
        assert_eq!(model.times, vec![1]);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_toml_str(ONE_STEP_CALL).unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let broken = ONE_STEP_CALL.replace("u = 2.0", "u = two");
        match RunConfig::from_toml_str(&broken) {
            Err(ConfigError::Parse { line: Some(l), .. }) => assert_eq!(l, 6),
            other => panic!("unexpected {other:?}"),
        }
        let unknown = ONE_STEP_CALL.replace("rho = 0.0", "rho = 0.0\nsigma = 0.2");
        assert!(RunConfig::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn chain_signals() {
        let text = ONE_STEP_CALL.replace(
            "type = \"mortality\"\ndeath_probs = [0.2]",
            "type = \"chain\"\ntimes = [1]\nstates = [[\"low\", \"high\"]]\ninitial = [0.3, 0.7]",
        );
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        let model = cfg.signals.build().unwrap();
        assert_eq!(model.states[0], vec!["low", "high"]);
    }
}
