//! Turning the optimal target into a trading strategy.
//!
//! The strategy replicates the market-measurable claim
//! `H(x) = min(D̄(x), Γ(x))`, where `D̄` is the upper envelope of the claim
//! over positive-probability signal paths. Its terminal value dominates
//! `min(D, Γ)` in every scenario.

use crate::claims::Claim;
use crate::error::{domain, Result};
use crate::lattice::Strategy;
use crate::scenario::{Measure, RandomVariable, ScenarioSpace};
use crate::solver::SolverResult;

/// Pathwise maximum of a random variable over signal paths, per market path.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperEnvelope {
    pub values: Vec<f64>,
}

/// Every enumerated signal path has positive probability, so the envelope is
/// the plain maximum over each market block.
pub fn upper_envelope(space: &ScenarioSpace, m: &RandomVariable) -> UpperEnvelope {
    let values = (0..space.market_count())
        .map(|x| {
            m.values()[space.market_block(x)]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    UpperEnvelope { values }
}

impl UpperEnvelope {
    /// The envelope spread back over scenarios.
    pub fn as_random_variable(&self, space: &ScenarioSpace) -> RandomVariable {
        RandomVariable::new(
            space
                .scenarios()
                .iter()
                .map(|sc| self.values[sc.market])
                .collect(),
        )
        .expect("envelope of finite values is finite")
    }
}

/// `E^R[D̄]`, the cost of replicating the claim's upper envelope.
pub fn superhedge_price(space: &ScenarioSpace, claim: &Claim) -> f64 {
    let env = upper_envelope(space, &claim.as_random_variable());
    let r = space.lattice().risk_neutral_probabilities();
    crate::numeric::weighted_sum(&r, &env.values)
}

/// The market claim `min(D̄(x), Γ(x))` the optimal strategy replicates.
pub fn hedge_target(space: &ScenarioSpace, claim: &Claim, result: &SolverResult) -> Result<Vec<f64>> {
    if result.gamma.gamma.len() != space.market_count() {
        return Err(domain("solver result does not match the scenario space"));
    }
    let env = upper_envelope(space, &claim.as_random_variable());
    Ok(env
        .values
        .iter()
        .zip(&result.gamma.gamma)
        .map(|(d_bar, g)| d_bar.min(*g))
        .collect())
}

pub fn build_optimal_strategy(space: &ScenarioSpace, claim: &Claim, result: &SolverResult) -> Result<Strategy> {
    let target = hedge_target(space, claim, result)?;
    space.lattice().replicate(&target)
}

/// Per-scenario success ratio realized by a strategy's terminal value.
pub fn strategy_ratio_table(space: &ScenarioSpace, claim: &Claim, strategy: &Strategy) -> Result<Vec<f64>> {
    if claim.values().len() != space.len() {
        return Err(domain("claim does not match the scenario space"));
    }
    if strategy.steps() != space.lattice().steps() {
        return Err(domain("strategy and lattice have different horizons"));
    }
    let min = strategy.min_value();
    if min.is_nan() || min < 0.0 {
        return Err(domain(format!("strategy value process reaches {min} < 0")));
    }
    let terminal = strategy.terminal_values();
    Ok(space
        .scenarios()
        .iter()
        .zip(claim.values())
        .map(|(sc, d)| {
            let v = terminal[sc.market];
            if v >= *d {
                1.0
            } else {
                v / d
            }
        })
        .collect())
}

/// Expected success ratio of a strategy, by full enumeration under P.
pub fn evaluate_strategy(space: &ScenarioSpace, claim: &Claim, strategy: &Strategy) -> Result<f64> {
    let phi = strategy_ratio_table(space, claim, strategy)?;
    Ok(space.expectation(&phi, Measure::Physical))
}
