//! End-to-end run: build the model, solve, hedge, verify, and write outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{claim_from_table, pure_endowment, read_claim_table, unit_linked_call, Claim};
use crate::config::{ClaimSpec, ConfigError, RunConfig};
use crate::error::HedgeError;
use crate::lattice::{Lattice, Strategy};
use crate::oracle::{brute_force_optimal, monte_carlo_eval, MC_GENERATOR};
use crate::scenario::ScenarioSpace;
use crate::signals::enumerate_signal_paths_capped;
use crate::solver::{solve_budget, SolverResult};
use crate::superhedge::{build_optimal_strategy, hedge_target, superhedge_price, upper_envelope};

pub const REPORT_FILE: &str = "report.toml";
pub const GAMMA_FILE: &str = "gamma.csv";
pub const STRATEGY_FILE: &str = "strategy.csv";
pub const CLAIM_FILE: &str = "claim.csv";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] HedgeError),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit status: 2 config, 3 domain, 4 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(HedgeError::Capacity(_)) => 4,
            RunError::Model(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

/// A fully built hedging problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub lattice: Lattice,
    pub space: ScenarioSpace,
    pub claim: Claim,
}

fn load_claim(spec: &ClaimSpec, space: &ScenarioSpace, base_dir: &Path) -> Result<Claim, RunError> {
    Ok(match spec {
        ClaimSpec::UnitLinkedCall { strike } => unit_linked_call(space, *strike)?,
        ClaimSpec::PureEndowment { benefit } => pure_endowment(space, *benefit)?,
        ClaimSpec::Table { path } => {
            let full = base_dir.join(path);
            let file = fs::File::open(&full).map_err(|source| ConfigError::Io { path: full, source })?;
            claim_from_table(space, &read_claim_table(file)?)?
        }
    })
}

/// Builds lattice, scenario space and claim. Table paths resolve against `base_dir`.
pub fn build_problem(cfg: &RunConfig, base_dir: &Path) -> Result<Problem, RunError> {
    let lattice = Lattice::build(cfg.market, cfg.limits.max_steps)?;
    let model = cfg.signals.build()?;
    let space = ScenarioSpace::build(&lattice, &model, cfg.limits.max_signal_paths, cfg.limits.max_scenarios)?;
    let claim = load_claim(&cfg.claim, &space, base_dir)?;
    Ok(Problem { lattice, space, claim })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub market_path_id: usize,
    pub moves: String,
    pub gamma: f64,
    pub claim_envelope: f64,
    pub hedge_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_sims: usize,
    pub seed: u64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch; the only field that varies between identical runs.
    pub generated_at: u64,
    pub budget: f64,
    pub v0_used: f64,
    pub budget_used: f64,
    pub superhedge_price_of_d: f64,
    pub k: f64,
    pub success_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSummary>,
    pub gamma: Vec<GammaRow>,
    pub config: RunConfig,
}

impl Report {
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("report serializes to TOML")
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `outputs.dir`.
    pub out_dir: Option<PathBuf>,
    /// Skips the oracle and Monte Carlo checks.
    pub no_verify: bool,
    /// Directory that relative paths in the config resolve against.
    pub base_dir: PathBuf,
    /// Fixed timestamp for reproducible reports.
    pub timestamp: Option<u64>,
}

/// Everything a run produces, before anything touches the filesystem.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub problem: Problem,
    pub result: SolverResult,
    pub strategy: Strategy,
    pub report: Report,
}

/// Runs the pipeline in memory.
pub fn execute(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutput, RunError> {
    let problem = build_problem(cfg, &opts.base_dir)?;
    let Problem { lattice, space, claim } = &problem;
    let result = solve_budget(space, claim, cfg.budget)?;
    let strategy = build_optimal_strategy(space, claim, &result)?;

    let verify = if opts.no_verify { None } else { cfg.verify };
    let oracle_ratio = verify
        .and_then(|v| v.oracle)
        .map(|o| brute_force_optimal(space, claim, cfg.budget, &o))
        .transpose()?;
    let monte_carlo = verify
        .and_then(|v| v.monte_carlo)
        .map(|mc| {
            monte_carlo_eval(space, claim, &strategy, &mc).map(|est| MonteCarloSummary {
                estimate: est.estimate,
                standard_error: est.standard_error,
                n_sims: est.n_sims,
                seed: mc.seed,
                generator: MC_GENERATOR.to_string(),
            })
        })
        .transpose()?;

    let envelope = upper_envelope(space, &claim.as_random_variable());
    let target = hedge_target(space, claim, &result)?;
    let gamma = lattice
        .paths()
        .iter()
        .map(|p| GammaRow {
            market_path_id: p.id,
            moves: p.label(),
            gamma: result.gamma.gamma[p.id],
            claim_envelope: envelope.values[p.id],
            hedge_target: target[p.id],
        })
        .collect();
    let generated_at = opts.timestamp.unwrap_or_else(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let report = Report {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at,
        budget: cfg.budget,
        v0_used: strategy.v0,
        budget_used: result.budget_used,
        superhedge_price_of_d: superhedge_price(space, claim),
        k: result.k,
        success_ratio: result.success_ratio,
        oracle_ratio,
        monte_carlo,
        gamma,
        config: cfg.clone(),
    };
    Ok(RunOutput {
        problem,
        result,
        strategy,
        report,
    })
}

/// Runs the pipeline and writes the report and tables into the output directory.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<(Report, PathBuf), RunError> {
    let out = execute(cfg, opts)?;
    let dir = opts
        .out_dir
        .clone()
        .unwrap_or_else(|| opts.base_dir.join(&cfg.outputs.dir));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(REPORT_FILE), out.report.to_toml_string())?;

    let mut gamma_csv = csv::Writer::from_path(dir.join(GAMMA_FILE)).map_err(csv_io)?;
    for row in &out.report.gamma {
        gamma_csv.serialize(row).map_err(csv_io)?;
    }
    gamma_csv.flush()?;
    out.strategy
        .write_csv(fs::File::create(dir.join(STRATEGY_FILE))?)
        .map_err(csv_io)?;
    out.problem
        .claim
        .write_csv(&out.problem.space, fs::File::create(dir.join(CLAIM_FILE))?)
        .map_err(csv_io)?;
    Ok((out.report, dir))
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiagnosticKind {
    Parse,
    Arbitrage,
    Domain,
    Capacity,
    Membership,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.kind {
            DiagnosticKind::Parse => "parse",
            DiagnosticKind::Arbitrage => "arbitrage",
            DiagnosticKind::Domain => "domain",
            DiagnosticKind::Capacity => "capacity",
            DiagnosticKind::Membership => "membership",
        };
        write!(f, "[{tag}] {}", self.message)
    }
}

impl From<HedgeError> for Diagnostic {
    fn from(e: HedgeError) -> Self {
        let kind = match &e {
            HedgeError::Arbitrage(_) => DiagnosticKind::Arbitrage,
            HedgeError::Domain(_) => DiagnosticKind::Domain,
            HedgeError::Capacity(_) => DiagnosticKind::Capacity,
            HedgeError::Membership(_) => DiagnosticKind::Membership,
        };
        Diagnostic {
            kind,
            message: e.to_string(),
        }
    }
}

fn domain_diag(message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        kind: DiagnosticKind::Domain,
        message: message.into(),
    }
}

/// Dry-run checks of a parsed configuration; nothing is solved.
pub fn validate(cfg: &RunConfig, base_dir: &Path) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Err(e) = cfg.market.validate(cfg.limits.max_steps) {
        out.push(e.into());
    }
    if !(cfg.budget.is_finite() && cfg.budget >= 0.0) {
        out.push(domain_diag(format!("budget must be finite and >= 0, got {}", cfg.budget)));
    }
    let signal_paths = match cfg.signals.build() {
        Ok(model) => {
            if let Err(e) = model.check_horizon(cfg.market.steps) {
                out.push(e.into());
            }
            match enumerate_signal_paths_capped(&model, cfg.limits.max_signal_paths) {
                Ok(paths) => Some(paths.len()),
                Err(e) => {
                    out.push(e.into());
                    None
                }
            }
        }
        Err(e) => {
            out.push(e.into());
            None
        }
    };
    if let Some(n) = signal_paths {
        let market = 1usize.checked_shl(cfg.market.steps as u32).unwrap_or(usize::MAX);
        let total = market.saturating_mul(n);
        if total > cfg.limits.max_scenarios {
            out.push(
                HedgeError::Capacity(format!(
                    "{total} scenarios exceeds the cap of {}",
                    cfg.limits.max_scenarios
                ))
                .into(),
            );
        }
    }
    match &cfg.claim {
        ClaimSpec::UnitLinkedCall { strike } if !(strike.is_finite() && *strike >= 0.0) => {
            out.push(domain_diag(format!("strike must be >= 0, got {strike}")))
        }
        ClaimSpec::PureEndowment { benefit } if !(benefit.is_finite() && *benefit >= 0.0) => {
            out.push(domain_diag(format!("benefit must be >= 0, got {benefit}")))
        }
        ClaimSpec::Table { path } => {
            let full = base_dir.join(path);
            match fs::File::open(&full) {
                Ok(f) => {
                    if let Err(e) = read_claim_table(f) {
                        out.push(e.into());
                    }
                }
                Err(e) => out.push(domain_diag(format!("cannot open claim table {}: {e}", full.display()))),
            }
        }
        _ => {}
    }
    if let Some(v) = cfg.verify {
        if v.oracle.is_some_and(|o| o.grid_points < 2) {
            out.push(domain_diag("verify.oracle.grid_points must be at least 2"));
        }
        if v.monte_carlo.is_some_and(|m| m.n_sims == 0) {
            out.push(domain_diag("verify.monte_carlo.n_sims must be at least 1"));
        }
    }
    out
}

/// Parses and validates a configuration text; parse failures become a single diagnostic.
pub fn validate_source(text: &str, base_dir: &Path) -> Vec<Diagnostic> {
    match RunConfig::from_toml_str(text) {
        Ok(cfg) => validate(&cfg, base_dir),
        Err(e) => vec![Diagnostic {
            kind: DiagnosticKind::Parse,
            message: e.to_string(),
        }],
    }
}
