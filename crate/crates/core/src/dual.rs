//! Parametric martingale measures concentrating mass where `M >= K`.
//!
//! For `alpha ∈ [0, 1]` and a market-measurable level `K` attained on every
//! market path, the density with respect to R is `Π_i A_i` with
//!
//! ```text
//! A_i = alpha + (1 - alpha) * R(M >= K | F_{t_i}) / R(M >= K | F^X_{t_i} ∨ F_{t_{i-1}})
//! ```
//!
//! Each factor has conditional mean 1 given `F^X_{t_i} ∨ F_{t_{i-1}}`, so the
//! density only reweights signal outcomes and leaves the market dynamics
//! untouched. When the denominator vanishes on an atom the numerator vanishes
//! on all of its sub-atoms and the ratio is taken to be 1 there.
//!
//! Taking `K = M̄` and letting `alpha -> 0` drives `E^{R^{alpha,K}}[M]`
//! towards `E^R[M̄]` whenever the event `{M = M̄}` stays reachable after each
//! signal.

use crate::error::{domain, HedgeError, Result};
use crate::numeric::compensated_sum;
use crate::scenario::{Field, Measure, RandomVariable, ScenarioSpace};
use crate::superhedge::upper_envelope;

#[derive(Debug, Clone, PartialEq)]
pub struct DualMeasure {
    pub alpha: f64,
    /// Level per market path.
    pub k: Vec<f64>,
    /// `dR^{alpha,K}/dR` per scenario.
    pub density: Vec<f64>,
    /// `factors[i][scenario]` is the factor contributed by signal `i + 1`.
    pub factors: Vec<Vec<f64>>,
}

impl DualMeasure {
    /// Only `alpha > 0` gives a measure equivalent to R.
    pub fn is_equivalent(&self) -> bool {
        self.alpha > 0.0
    }

    /// `E^R[density]`.
    pub fn total_mass(&self, space: &ScenarioSpace) -> f64 {
        space.expectation(&self.density, Measure::RiskNeutral)
    }
}

/// Distinct values of `m` on each market path; every such level is attainable.
pub fn attainable_levels(space: &ScenarioSpace, m: &RandomVariable) -> Vec<Vec<f64>> {
    (0..space.market_count())
        .map(|x| {
            let mut levels = m.values()[space.market_block(x)].to_vec();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            levels
        })
        .collect()
}

fn event_probability(space: &ScenarioSpace, event: &[f64], field: Field) -> Result<Vec<f64>> {
    let partition = space.field_partition(field)?;
    let per_atom = partition.conditional_mean(&space.probabilities(Measure::RiskNeutral), event)?;
    Ok(partition.spread(&per_atom))
}

pub fn build_dual_measure(
    space: &ScenarioSpace,
    m: &RandomVariable,
    k: &[f64],
    alpha: f64,
) -> Result<DualMeasure> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if m.values().len() != space.len() {
        return Err(domain("random variable does not match the scenario space"));
    }
    if k.len() != space.market_count() {
        return Err(domain("level must have one entry per market path"));
    }
    let event: Vec<f64> = space
        .scenarios()
        .iter()
        .zip(m.values())
        .map(|(sc, v)| if *v >= k[sc.market] { 1.0 } else { 0.0 })
        .collect();
    for x in 0..space.market_count() {
        if event[space.market_block(x)].iter().all(|e| *e == 0.0) {
            return Err(HedgeError::Membership(format!(
                "level {} exceeds every value on market path {x}",
                k[x]
            )));
        }
    }

    let n = space.signal_model().len();
    let mut factors = Vec::with_capacity(n);
    for i in 1..=n {
        let fine = event_probability(space, &event, Field::AtSignal(i))?;
        let coarse = event_probability(space, &event, Field::MarketBeforeSignal(i))?;
        let factor = fine
            .iter()
            .zip(&coarse)
            .map(|(num, den)| {
                let ratio = if *den == 0.0 { 1.0 } else { num / den };
                alpha + (1.0 - alpha) * ratio
            })
            .collect();
        factors.push(factor);
    }
    let density = (0..space.len())
        .map(|j| factors.iter().map(|f: &Vec<f64>| f[j]).product())
        .collect();
    Ok(DualMeasure {
        alpha,
        k: k.to_vec(),
        density,
        factors,
    })
}

/// Largest violation of the martingale property of the discounted price
/// under the dual measure, over every node and information atom.
pub fn verify_martingale(space: &ScenarioSpace, dual: &DualMeasure) -> Result<f64> {
    if !dual.is_equivalent() {
        return Err(domain("martingale check needs alpha > 0"));
    }
    let lattice = space.lattice();
    let n = lattice.steps();
    let weights: Vec<f64> = space
        .scenarios()
        .iter()
        .zip(&dual.density)
        .map(|(sc, z)| sc.r * z)
        .collect();
    let mut worst = 0.0_f64;
    for t in 0..n {
        let partition = space.information_at(t);
        let next: Vec<f64> = space
            .scenarios()
            .iter()
            .map(|sc| lattice.paths()[sc.market].prices[t + 1])
            .collect();
        let means = partition.conditional_mean(&weights, &next)?;
        for (j, sc) in space.scenarios().iter().enumerate() {
            let here = lattice.paths()[sc.market].prices[t];
            worst = worst.max((means[partition.atom_of(j)] - here).abs());
        }
    }
    Ok(worst)
}

/// `E^R[density · M]`.
pub fn dual_expectation(space: &ScenarioSpace, m: &RandomVariable, dual: &DualMeasure) -> f64 {
    compensated_sum(
        space
            .scenarios()
            .iter()
            .zip(&dual.density)
            .zip(m.values())
            .map(|((sc, z), v)| sc.r * z * v),
    )
}

/// Superhedging value `E^R[M̄]` of a nonnegative claim.
pub fn superhedge_price_via_duality(space: &ScenarioSpace, m: &RandomVariable) -> Result<f64> {
    if m.values().len() != space.len() {
        return Err(domain("random variable does not match the scenario space"));
    }
    if let Some(v) = m.values().iter().find(|v| **v < 0.0) {
        return Err(domain(format!("claim must be nonnegative, found {v}")));
    }
    let env = upper_envelope(space, m);
    let r = space.lattice().risk_neutral_probabilities();
    Ok(crate::numeric::weighted_sum(&r, &env.values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::unit_linked_call;
    use crate::lattice::{build_lattice, LatticeParams};
    use crate::scenario::build_scenario_space;
    use crate::signals::{mortality_model, SignalModel};

    fn one_step_call() -> (ScenarioSpace, RandomVariable) {
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
        let m = unit_linked_call(&space, 100.0).unwrap().as_random_variable();
        (space, m)
    }

    #[test]
    fn alpha_one_is_reference_measure() {
        let (space, m) = one_step_call();
        let env = upper_envelope(&space, &m).values;
        let dual = build_dual_measure(&space, &m, &env, 1.0).unwrap();
        assert!(dual.density.iter().all(|z| *z == 1.0));
        assert!(verify_martingale(&space, &dual).unwrap() <= 1e-12);
        let plain = space.expectation(m.values(), Measure::RiskNeutral);
        assert!((dual_expectation(&space, &m, &dual) - plain).abs() < 1e-15);
    }

    #[test]
    fn alpha_zero_concentrates_on_envelope() {
        let (space, m) = one_step_call();
        let env = upper_envelope(&space, &m).values;
        let dual = build_dual_measure(&space, &m, &env, 0.0).unwrap();
        // scenarios: (down, alive), (down, dead), (up, alive), (up, dead)
        let expected = [1.0, 1.0, 1.0 / 0.8, 0.0];
        for (z, e) in dual.density.iter().zip(expected) {
            assert!((z - e).abs() < 1e-12);
        }
        assert!((dual_expectation(&space, &m, &dual) - 100.0 / 3.0).abs() < 1e-12);
        assert!(!dual.is_equivalent());
        assert!(verify_martingale(&space, &dual).is_err());
    }

    #[test]
    fn half_alpha_stays_martingale() {
        let (space, m) = one_step_call();
        let env = upper_envelope(&space, &m).values;
        let dual = build_dual_measure(&space, &m, &env, 0.5).unwrap();
        assert!(verify_martingale(&space, &dual).unwrap() <= 1e-12);
        assert!((dual.total_mass(&space) - 1.0).abs() < 1e-12);
        assert!(dual.density.iter().all(|z| *z > 0.0));
    }

    #[test]
    fn unattainable_level_rejected() {
        let (space, m) = one_step_call();
        let err = build_dual_measure(&space, &m, &[0.0, 100.5], 0.5).unwrap_err();
        assert!(matches!(err, HedgeError::Membership(_)));
        assert!(build_dual_measure(&space, &m, &[0.0, 0.0], 1.5).is_err());
    }

    #[test]
    fn duality_price_examples() {
        let (space, m) = one_step_call();
        assert!((superhedge_price_via_duality(&space, &m).unwrap() - 100.0 / 3.0).abs() < 1e-12);
        let zero = RandomVariable::constant(&space, 0.0);
        assert_eq!(superhedge_price_via_duality(&space, &zero).unwrap(), 0.0);
        let market = RandomVariable::new(
            space.scenarios().iter().map(|s| 30.0 * s.market as f64).collect(),
        )
        .unwrap();
        assert!((superhedge_price_via_duality(&space, &market).unwrap() - 10.0).abs() < 1e-12);
        let negative = RandomVariable::constant(&space, -1.0);
        assert!(superhedge_price_via_duality(&space, &negative).is_err());
    }

    #[test]
    fn no_signals_means_trivial_density() {
        let (space, _) = one_step_call();
        let bare = build_scenario_space(space.lattice(), &SignalModel::none()).unwrap();
        let m = RandomVariable::new(vec![1.0, 2.0]).unwrap();
        let dual = build_dual_measure(&bare, &m, &[1.0, 2.0], 0.0).unwrap();
        assert_eq!(dual.density, vec![1.0, 1.0]);
        assert!(dual.factors.is_empty());
    }

    #[test]
    fn levels_are_distinct_values() {
        let (space, m) = one_step_call();
        assert_eq!(attainable_levels(&space, &m), vec![vec![0.0], vec![0.0, 100.0]]);
    }
}
