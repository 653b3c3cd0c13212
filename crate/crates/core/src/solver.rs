//! Optimal market-measurable target under a capital constraint.
//!
//! For a market path `x` with distinct positive payoff levels
//! `0 = d_0 < d_1 < ... < d_m`, the expected success ratio contributed by
//! that path is concave and piecewise linear in the target `Γ(x)`. Raising
//! `Γ(x)` across `[d_{j-1}, d_j]` costs `r(x)` per unit and gains
//!
//! ```text
//! W(x, d_j) = p(x)/r(x) * Σ_{s : D(x,s) >= d_j} pi(s) / D(x,s)
//! ```
//!
//! per unit of capital. The threshold target `f(k)` keeps every level whose
//! slope is at least `k`; [`solve_budget`] fills segments greedily by slope,
//! with at most one fractionally filled segment, which is the exact optimum of
//! the resulting continuous knapsack.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::claims::Claim;
use crate::error::{domain, Result};
use crate::numeric::{compensated_sum, weighted_sum, CompensatedSum};
use crate::scenario::ScenarioSpace;

/// Absolute tolerance for currency and probability comparisons.
pub const TOLERANCE: f64 = 1e-12;

/// One linear piece of a path's success-ratio curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeSegment {
    pub path: usize,
    pub lower: f64,
    pub upper: f64,
    /// Success ratio gained per unit of capital on this piece.
    pub slope: f64,
    /// Capital needed per unit of target, `r(x)`.
    pub cost_per_unit: f64,
}

impl SlopeSegment {
    pub fn cost(&self) -> f64 {
        self.cost_per_unit * (self.upper - self.lower)
    }
}

/// Market-measurable target `Γ(x)`, one entry per market path.
#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedClaim {
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub gamma: ModifiedClaim,
    /// Slope of the marginal segment; 0 once every segment is filled.
    pub k: f64,
    pub budget: f64,
    /// `E^R[Γ]`.
    pub budget_used: f64,
    /// `E^P[min(1, Γ/D)]` with success on `D = 0`.
    pub success_ratio: f64,
    /// Per-scenario success ratio.
    pub ratio_table: Vec<f64>,
}

fn check_inputs(space: &ScenarioSpace, claim: &Claim) -> Result<()> {
    if claim.values().len() != space.len() {
        return Err(domain("claim does not match the scenario space"));
    }
    Ok(())
}

fn path_segments(space: &ScenarioSpace, claim: &Claim, market: usize) -> Vec<SlopeSegment> {
    let path = &space.lattice().paths()[market];
    let block = space.market_block(market);
    let mut payoffs: Vec<(f64, f64)> = space.signal_paths()
        .iter()
        .zip(&claim.values()[block])
        .filter(|(_, d)| **d > 0.0)
        .map(|(s, d)| (*d, s.pi))
        .collect();
    payoffs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut levels: Vec<f64> = payoffs.iter().map(|(d, _)| *d).collect();
    levels.dedup();

    let density = path.p / path.r;
    let mut lower = 0.0;
    levels
        .into_iter()
        .map(|level| {
            let start = payoffs.partition_point(|(d, _)| *d < level);
            let weight = compensated_sum(payoffs[start..].iter().map(|(d, pi)| pi / d));
            let segment = SlopeSegment {
                path: market,
                lower,
                upper: level,
                slope: density * weight,
                cost_per_unit: path.r,
            };
            lower = level;
            segment
        })
        .collect()
}

/// All slope segments, grouped by market path with levels ascending.
pub fn compute_slopes(space: &ScenarioSpace, claim: &Claim) -> Result<Vec<SlopeSegment>> {
    check_inputs(space, claim)?;
    let per_path: Vec<Vec<SlopeSegment>> = (0..space.market_count())
        .into_par_iter()
        .map(|x| path_segments(space, claim, x))
        .collect();
    Ok(per_path.into_iter().flatten().collect())
}

/// Threshold target: on each path, the highest level whose slope is at least `k`.
pub fn compute_f(space: &ScenarioSpace, claim: &Claim, k: f64) -> Result<ModifiedClaim> {
    if !(k.is_finite() && k > 0.0) {
        return Err(domain(format!("threshold slope must be positive, got {k}")));
    }
    let mut gamma = vec![0.0_f64; space.market_count()];
    for seg in compute_slopes(space, claim)? {
        if seg.slope >= k {
            gamma[seg.path] = gamma[seg.path].max(seg.upper);
        }
    }
    Ok(ModifiedClaim { gamma })
}

/// Per-scenario success ratio `min(1, Γ(x)/D(x,s))`, with 1 where `D = 0`.
pub fn ratio_table(space: &ScenarioSpace, claim: &Claim, gamma: &ModifiedClaim) -> Result<Vec<f64>> {
    check_inputs(space, claim)?;
    if gamma.gamma.len() != space.market_count() {
        return Err(domain("target does not match the number of market paths"));
    }
    if let Some(g) = gamma.gamma.iter().find(|g| !g.is_finite() || **g < 0.0) {
        return Err(domain(format!("target values must be finite and >= 0, got {g}")));
    }
    Ok(space
        .scenarios()
        .iter()
        .zip(claim.values())
        .map(|(sc, d)| {
            if *d == 0.0 {
                1.0
            } else {
                (gamma.gamma[sc.market] / d).min(1.0)
            }
        })
        .collect())
}

/// Expected success ratio `E^P[min(1, Γ/D)]` of a market-measurable target.
pub fn success_ratio(space: &ScenarioSpace, claim: &Claim, gamma: &ModifiedClaim) -> Result<f64> {
    let phi = ratio_table(space, claim, gamma)?;
    Ok(space.expectation(&phi, crate::scenario::Measure::Physical))
}

fn by_slope_then_position(a: &SlopeSegment, b: &SlopeSegment) -> Ordering {
    b.slope
        .total_cmp(&a.slope)
        .then(a.path.cmp(&b.path))
        .then(a.lower.total_cmp(&b.lower))
}

/// Maximizes the expected success ratio over targets with `E^R[Γ] <= budget`.
///
/// Segments are filled in decreasing slope order, ties broken by
/// `(path, level)`. The segment where the budget runs out is filled
/// fractionally; residuals within a few ulps of the budget count as exhausted.
pub fn solve_budget(space: &ScenarioSpace, claim: &Claim, budget: f64) -> Result<SolverResult> {
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(domain(format!("budget must be finite and >= 0, got {budget}")));
    }
    let mut segments = compute_slopes(space, claim)?;
    segments.sort_by(by_slope_then_position);

    let mut gamma = vec![0.0; space.market_count()];
    let mut k = 0.0;
    // rounding slack when matching cumulative costs against the budget
    let slack = 4.0 * f64::EPSILON * budget.max(1.0);
    let mut spent = CompensatedSum::default();
    for seg in &segments {
        let before = spent.value();
        spent.add(seg.cost());
        if spent.value() <= budget + slack {
            gamma[seg.path] = seg.upper;
            continue;
        }
        k = seg.slope;
        let remaining = budget - before;
        if remaining > slack {
            gamma[seg.path] = seg.lower + remaining / seg.cost_per_unit;
        }
        break;
    }

    let gamma = ModifiedClaim { gamma };
    let r: Vec<f64> = space.lattice().risk_neutral_probabilities();
    let budget_used = weighted_sum(&r, &gamma.gamma);
    let ratio_table = ratio_table(space, claim, &gamma)?;
    let success_ratio = space.expectation(&ratio_table, crate::scenario::Measure::Physical);
    Ok(SolverResult {
        gamma,
        k,
        budget,
        budget_used,
        success_ratio,
        ratio_table,
    })
}
