//! Independent checks of the solver and of hedging strategies.
//!
//! [`brute_force_optimal`] searches the candidate targets directly: every
//! path sits at `0` or at one of its payoff levels, except possibly one path
//! that absorbs the leftover budget. The optimum of the concave
//! piecewise-linear program lies in this family. The search keeps, path by
//! path, every Pareto-undominated `(cost, value)` combination, so nothing in
//! the family is skipped. It shares no code with the greedy solver.
//!
//! [`monte_carlo_eval`] samples scenarios under P with a seeded ChaCha20
//! generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::claims::Claim;
use crate::error::{domain, HedgeError, Result};
use crate::lattice::Strategy;
use crate::numeric::compensated_sum;
use crate::scenario::ScenarioSpace;
use crate::superhedge::strategy_ratio_table;

/// Budget feasibility slack for oracle candidates.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Name of the pseudo-random generator used for Monte Carlo runs.
pub const MC_GENERATOR: &str = "ChaCha20Rng (rand_chacha 0.3), stream = batch index, batch = 8192";

const MC_BATCH: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Grid resolution of each refinement pass.
    pub grid_points: usize,
    /// Number of local refinement passes after the exhaustive search.
    pub refine_rounds: usize,
    /// Cap on live candidate combinations per search round.
    #[serde(default = "default_max_combinations")]
    pub max_combinations: usize,
}

fn default_max_combinations() -> usize {
    4096
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points: 11,
            refine_rounds: 1,
            max_combinations: default_max_combinations(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_sims: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub best_ratio: f64,
    pub best_gamma: Vec<f64>,
    /// Number of complete candidates generated.
    pub evaluated: usize,
    /// Largest `E^R[Γ] - budget` over generated candidates; infeasible ones are discarded.
    pub worst_budget_excess: f64,
}

/// Success-ratio curve of one market path, evaluated directly.
struct PathCurve {
    rate: f64,
    /// `(p(x,s), D(x,s))` pairs.
    terms: Vec<(f64, f64)>,
    levels: Vec<f64>,
}

impl PathCurve {
    fn value(&self, gamma: f64) -> f64 {
        compensated_sum(self.terms.iter().map(|(p, d)| {
            if *d == 0.0 {
                *p
            } else {
                p * (gamma / d).min(1.0)
            }
        }))
    }

    fn top(&self) -> f64 {
        *self.levels.last().unwrap()
    }
}

fn curves(space: &ScenarioSpace, claim: &Claim) -> Vec<PathCurve> {
    (0..space.market_count())
        .map(|x| {
            let block = space.market_block(x);
            let terms: Vec<(f64, f64)> = space.scenarios()[block.clone()]
                .iter()
                .zip(&claim.values()[block])
                .map(|(sc, d)| (sc.p, *d))
                .collect();
            let mut levels: Vec<f64> = std::iter::once(0.0)
                .chain(terms.iter().map(|(_, d)| *d))
                .collect();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            PathCurve {
                rate: space.lattice().paths()[x].r,
                terms,
                levels,
            }
        })
        .collect()
}

#[derive(Clone)]
struct Partial {
    cost: f64,
    value: f64,
    gamma: Vec<f64>,
}

fn pareto_front(mut states: Vec<Partial>) -> Vec<Partial> {
    states.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.value.total_cmp(&a.value)));
    let mut front: Vec<Partial> = Vec::with_capacity(states.len());
    for s in states {
        if front.last().is_none_or(|best| s.value > best.value) {
            front.push(s);
        }
    }
    front
}

fn total_cost(curves: &[PathCurve], gamma: &[f64]) -> f64 {
    compensated_sum(curves.iter().zip(gamma).map(|(c, g)| c.rate * g))
}

fn total_value(curves: &[PathCurve], gamma: &[f64]) -> f64 {
    compensated_sum(curves.iter().zip(gamma).map(|(c, g)| c.value(*g)))
}

/// Exhaustive search with the fractional path `free` (if any) left for last.
fn search_with_free_path(
    curves: &[PathCurve],
    budget: f64,
    free: Option<usize>,
    cap: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut states = vec![Partial {
        cost: 0.0,
        value: 0.0,
        gamma: vec![0.0; curves.len()],
    }];
    for (x, curve) in curves.iter().enumerate() {
        if Some(x) == free {
            continue;
        }
        let mut next = Vec::with_capacity(states.len() * curve.levels.len());
        for s in &states {
            for level in &curve.levels {
                let cost = s.cost + curve.rate * level;
                if cost > budget + BUDGET_SLACK {
                    continue;
                }
                let mut gamma = s.gamma.clone();
                gamma[x] = *level;
                next.push(Partial {
                    cost,
                    value: s.value + curve.value(*level),
                    gamma,
                });
            }
        }
        states = pareto_front(next);
        if states.len() > cap {
            return Err(HedgeError::Capacity(format!(
                "{} live candidate combinations exceeds the cap of {cap}",
                states.len()
            )));
        }
    }
    Ok(states
        .into_iter()
        .map(|s| {
            let mut gamma = s.gamma;
            if let Some(f) = free {
                let curve = &curves[f];
                let room = (budget - s.cost).max(0.0) / curve.rate;
                gamma[f] = room.min(curve.top());
            }
            gamma
        })
        .collect())
}

/// Full search outcome; see [`brute_force_optimal`].
pub fn brute_force_search(
    space: &ScenarioSpace,
    claim: &Claim,
    budget: f64,
    cfg: &OracleConfig,
) -> Result<OracleOutcome> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(domain(format!("budget must be finite and >= 0, got {budget}")));
    }
    if cfg.grid_points < 2 {
        return Err(domain("oracle grid needs at least 2 points"));
    }
    if claim.values().len() != space.len() {
        return Err(domain("claim does not match the scenario space"));
    }
    let curves = curves(space, claim);
    let frees: Vec<Option<usize>> = std::iter::once(None)
        .chain((0..curves.len()).filter(|x| curves[*x].levels.len() > 1).map(Some))
        .collect();
    let candidates: Vec<Vec<Vec<f64>>> = frees
        .par_iter()
        .map(|free| search_with_free_path(&curves, budget, *free, cfg.max_combinations))
        .collect::<Result<_>>()?;

    let mut outcome = OracleOutcome {
        best_ratio: f64::NEG_INFINITY,
        best_gamma: Vec::new(),
        evaluated: 0,
        worst_budget_excess: f64::NEG_INFINITY,
    };
    let consider = |gamma: Vec<f64>, outcome: &mut OracleOutcome| {
        let excess = total_cost(&curves, &gamma) - budget;
        outcome.evaluated += 1;
        outcome.worst_budget_excess = outcome.worst_budget_excess.max(excess);
        if excess > BUDGET_SLACK {
            return;
        }
        let value = total_value(&curves, &gamma);
        if value > outcome.best_ratio {
            outcome.best_ratio = value;
            outcome.best_gamma = gamma;
        }
    };
    for gamma in candidates.into_iter().flatten() {
        consider(gamma, &mut outcome);
    }

    let pairs = curves.len() * curves.len().saturating_sub(1);
    if cfg.refine_rounds > 0 && pairs * cfg.grid_points > cfg.max_combinations {
        return Err(HedgeError::Capacity(format!(
            "{} refinement candidates per round exceeds the cap of {}",
            pairs * cfg.grid_points,
            cfg.max_combinations
        )));
    }
    let scale = curves
        .iter()
        .map(|c| c.rate * c.top())
        .fold(0.0_f64, f64::max);
    for round in 1..=cfg.refine_rounds {
        let width = scale / (cfg.grid_points as f64).powi(round as i32 - 1);
        let incumbent = outcome.best_gamma.clone();
        for from in 0..curves.len() {
            for to in 0..curves.len() {
                if from == to {
                    continue;
                }
                for g in 0..cfg.grid_points {
                    // capital moved from one path to another
                    let shift = width * g as f64 / (cfg.grid_points - 1) as f64;
                    let taken = (shift / curves[from].rate).min(incumbent[from]);
                    let given = (taken * curves[from].rate / curves[to].rate)
                        .min(curves[to].top() - incumbent[to]);
                    let mut gamma = incumbent.clone();
                    gamma[from] -= taken;
                    gamma[to] += given.max(0.0);
                    consider(gamma, &mut outcome);
                }
            }
        }
    }
    Ok(outcome)
}

/// Best expected success ratio over market-measurable targets within budget.
pub fn brute_force_optimal(space: &ScenarioSpace, claim: &Claim, budget: f64, cfg: &OracleConfig) -> Result<f64> {
    brute_force_search(space, claim, budget, cfg).map(|o| o.best_ratio)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_sims: usize,
}

/// Count, mean and sum of squared deviations of one batch.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

/// Monte Carlo estimate of a strategy's expected success ratio under P.
///
/// Samples are drawn in fixed batches; batch `b` uses the ChaCha20 stream `b`
/// of the configured seed, and batch statistics are merged in batch order,
/// so the result does not depend on the thread count.
pub fn monte_carlo_eval(space: &ScenarioSpace, claim: &Claim, strategy: &Strategy, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.n_sims == 0 {
        return Err(domain("n_sims must be at least 1"));
    }
    let phi = strategy_ratio_table(space, claim, strategy)?;
    let mut running = 0.0;
    let cumulative: Vec<f64> = space
        .scenarios()
        .iter()
        .map(|sc| {
            running += sc.p;
            running
        })
        .collect();
    let total = running;
    let batches = cfg.n_sims.div_ceil(MC_BATCH);
    let moments: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let count = MC_BATCH.min(cfg.n_sims - b * MC_BATCH);
            let mut m = Moments {
                n: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for _ in 0..count {
                let u: f64 = rng.gen::<f64>() * total;
                let idx = cumulative.partition_point(|c| *c <= u).min(phi.len() - 1);
                let v = phi[idx];
                m.n += 1.0;
                let delta = v - m.mean;
                m.mean += delta / m.n;
                m.m2 += delta * (v - m.mean);
            }
            m
        })
        .collect();
    let all = moments.into_iter().fold(
        Moments {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        },
        Moments::merge,
    );
    let standard_error = if cfg.n_sims > 1 {
        (all.m2 / (all.n - 1.0)).sqrt() / all.n.sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        estimate: all.mean,
        standard_error,
        n_sims: cfg.n_sims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::unit_linked_call;
    use crate::lattice::{build_lattice, LatticeParams};
    use crate::scenario::build_scenario_space;
    use crate::signals::{mortality_model, SignalModel};
    use crate::solver::solve_budget;
    use crate::superhedge::build_optimal_strategy;

    fn one_step_call() -> (ScenarioSpace, Claim) {
        let lat = build_lattice(LatticeParams {
            s0: 100.0,
            u: 2.0,
            d: 0.5,
            rho: 0.0,
            steps: 1,
            p_up: 0.5,
        })
        .unwrap();
        let space = build_scenario_space(&lat, &mortality_model(1, &[0.2]).unwrap()).unwrap();
        let claim = unit_linked_call(&space, 100.0).unwrap();
        (space, claim)
    }

    #[test]
    fn oracle_on_one_step_call() {
        let (space, claim) = one_step_call();
        let cfg = OracleConfig::default();
        let out = brute_force_search(&space, &claim, 20.0, &cfg).unwrap();
        assert!((out.best_ratio - 0.84).abs() < 1e-12);
        assert!((out.best_gamma[1] - 60.0).abs() < 1e-9);
        assert!(out.worst_budget_excess <= BUDGET_SLACK);
        assert!((brute_force_optimal(&space, &claim, 100.0 / 3.0, &cfg).unwrap() - 1.0).abs() < 1e-12);
        assert!((brute_force_optimal(&space, &claim, 0.0, &cfg).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_bad_config_and_caps() {
        let (space, claim) = one_step_call();
        let thin = OracleConfig {
            grid_points: 1,
            ..Default::default()
        };
        assert!(brute_force_optimal(&space, &claim, 1.0, &thin).is_err());
        let tiny = OracleConfig {
            max_combinations: 1,
            refine_rounds: 0,
            grid_points: 2,
        };
        assert!(matches!(
            brute_force_optimal(&space, &claim, 40.0, &tiny),
            Err(HedgeError::Capacity(_))
        ));
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let (space, claim) = one_step_call();
        let res = solve_budget(&space, &claim, 20.0).unwrap();
        let strat = build_optimal_strategy(&space, &claim, &res).unwrap();
        let cfg = McConfig {
            n_sims: 20_000,
            seed: 7,
        };
        let a = monte_carlo_eval(&space, &claim, &strat, &cfg).unwrap();
        let b = monte_carlo_eval(&space, &claim, &strat, &cfg).unwrap();
        assert_eq!(a, b);
        assert!((a.estimate - 0.84).abs() < 4.0 * a.standard_error);
        let c = monte_carlo_eval(&space, &claim, &strat, &McConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn monte_carlo_on_single_scenario() {
        let lat = build_lattice(LatticeParams {
            s0: 100.0,
            u: 2.0,
            d: 0.5,
            rho: 0.0,
            steps: 1,
            p_up: 0.5,
        })
        .unwrap();
        let space = build_scenario_space(&lat, &SignalModel::none()).unwrap();
        let claim = crate::claims::Claim::new(&space, vec![30.0, 30.0], "flat").unwrap();
        let strat = lat.replicate(&[10.0, 10.0]).unwrap();
        let est = monte_carlo_eval(&space, &claim, &strat, &McConfig { n_sims: 5000, seed: 1 }).unwrap();
        assert_eq!(est.standard_error, 0.0);
        assert!((est.estimate - 1.0 / 3.0).abs() < 1e-15);
    }
}
