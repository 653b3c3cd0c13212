//! Joint market × signal probability space.
//!
//! Each scenario pairs a market path `x` with a signal path `s`. Under P it
//! has mass `p(x) pi(s)`; the martingale measure R is extended to the joint
//! space through its market density, giving mass `r(x) pi(s)`. Scenario
//! indices are `x * signal_count + s`.
//!
//! Sigma-fields are represented by atom partitions. An atom is identified by
//! how many market moves and how many signals it has observed.

use std::collections::HashMap;

use crate::error::{domain, HedgeError, Result};
use crate::lattice::Lattice;
use crate::numeric::{compensated_sum, weighted_sum};
use crate::signals::{enumerate_signal_paths_capped, SignalModel, SignalPath, DEFAULT_MAX_SIGNAL_PATHS};

/// Default cap on the number of joint scenarios.
pub const DEFAULT_MAX_SCENARIOS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub market: usize,
    pub signal: usize,
    /// Physical probability.
    pub p: f64,
    /// Extended martingale-measure probability.
    pub r: f64,
}

impl Scenario {
    /// `dP/dR` at this scenario; depends only on the market path.
    pub fn dp_dr(&self) -> f64 {
        self.p / self.r
    }

    pub fn dr_dp(&self) -> f64 {
        self.r / self.p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Physical,
    RiskNeutral,
}

/// The conditioning families used by the hedging and duality code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// The whole market path, no signals.
    MarketTerminal,
    /// Everything known at the `i`-th signal time (`i = 0` is the trivial field at time 0).
    AtSignal(usize),
    /// Market up to the `i`-th signal time together with signals `1..i-1` (`i >= 1`).
    MarketBeforeSignal(usize),
    /// Everything.
    Terminal,
}

/// Atom partition of the scenario list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    atom_of: Vec<usize>,
    atoms: usize,
}

impl Partition {
    pub fn atom_of(&self, scenario: usize) -> usize {
        self.atom_of[scenario]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms
    }

    /// Per-atom `Σ w v / Σ w`; errors if some atom has no mass.
    pub fn conditional_mean(&self, weights: &[f64], values: &[f64]) -> Result<Vec<f64>> {
        let mut num = vec![Vec::new(); self.atoms];
        let mut den = vec![Vec::new(); self.atoms];
        for ((a, w), v) in self.atom_of.iter().zip(weights).zip(values) {
            num[*a].push(w * v);
            den[*a].push(*w);
        }
        num.into_iter()
            .zip(den)
            .enumerate()
            .map(|(a, (n, d))| {
                let mass = compensated_sum(d);
                if mass <= 0.0 {
                    Err(domain(format!("conditioning atom {a} has zero probability")))
                } else {
                    Ok(compensated_sum(n) / mass)
                }
            })
            .collect()
    }

    /// Broadcasts per-atom values back onto scenarios.
    pub fn spread(&self, per_atom: &[f64]) -> Vec<f64> {
        self.atom_of.iter().map(|a| per_atom[*a]).collect()
    }
}

/// Per-scenario real values, e.g. a claim or a density.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable(Vec<f64>);

impl RandomVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("random variable is not finite at scenario {i}")));
        }
        Ok(Self(values))
    }

    pub fn constant(space: &ScenarioSpace, value: f64) -> Self {
        Self(vec![value; space.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for RandomVariable {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpace {
    lattice: Lattice,
    model: SignalModel,
    signal_paths: Vec<SignalPath>,
    scenarios: Vec<Scenario>,
}

pub fn build_scenario_space(lattice: &Lattice, signals: &SignalModel) -> Result<ScenarioSpace> {
    ScenarioSpace::build(lattice, signals, DEFAULT_MAX_SIGNAL_PATHS, DEFAULT_MAX_SCENARIOS)
}

impl ScenarioSpace {
    pub fn build(
        lattice: &Lattice,
        signals: &SignalModel,
        max_signal_paths: usize,
        max_scenarios: usize,
    ) -> Result<Self> {
        signals.check_horizon(lattice.steps())?;
        let signal_paths = enumerate_signal_paths_capped(signals, max_signal_paths)?;
        let total = lattice.path_count().saturating_mul(signal_paths.len());
        if total > max_scenarios {
            return Err(HedgeError::Capacity(format!(
                "{total} scenarios exceeds the cap of {max_scenarios}"
            )));
        }
        let scenarios = lattice
            .paths()
            .iter()
            .flat_map(|x| {
                signal_paths.iter().map(move |s| Scenario {
                    market: x.id,
                    signal: s.id,
                    p: x.p * s.pi,
                    r: x.r * s.pi,
                })
            })
            .collect();
        Ok(Self {
            lattice: lattice.clone(),
            model: signals.clone(),
            signal_paths,
            scenarios,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn signal_model(&self) -> &SignalModel {
        &self.model
    }

    pub fn signal_paths(&self) -> &[SignalPath] {
        &self.signal_paths
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn market_count(&self) -> usize {
        self.lattice.path_count()
    }

    pub fn signal_count(&self) -> usize {
        self.signal_paths.len()
    }

    pub fn index(&self, market: usize, signal: usize) -> usize {
        market * self.signal_paths.len() + signal
    }

    /// Scenario indices sharing market path `market`.
    pub fn market_block(&self, market: usize) -> std::ops::Range<usize> {
        let n = self.signal_paths.len();
        market * n..(market + 1) * n
    }

    pub fn signal_times(&self) -> &[usize] {
        &self.model.times
    }

    pub fn probabilities(&self, measure: Measure) -> Vec<f64> {
        self.scenarios
            .iter()
            .map(|s| match measure {
                Measure::Physical => s.p,
                Measure::RiskNeutral => s.r,
            })
            .collect()
    }

    pub fn expectation(&self, values: &[f64], measure: Measure) -> f64 {
        weighted_sum(&self.probabilities(measure), values)
    }

    /// Partition generated by the first `market_steps` moves and the first
    /// `signals` signal values.
    pub fn partition(&self, market_steps: usize, signals: usize) -> Partition {
        let n = self.lattice.steps();
        assert!(market_steps <= n && signals <= self.model.len());
        let mut prefix_ids: HashMap<&[usize], usize> = HashMap::new();
        let signal_prefix: Vec<usize> = self
            .signal_paths
            .iter()
            .map(|s| {
                let next = prefix_ids.len();
                *prefix_ids.entry(&s.states[..signals]).or_insert(next)
            })
            .collect();
        let mut atom_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let atom_of = self
            .scenarios
            .iter()
            .map(|sc| {
                let key = (sc.market >> (n - market_steps), signal_prefix[sc.signal]);
                let next = atom_ids.len();
                *atom_ids.entry(key).or_insert(next)
            })
            .collect();
        Partition {
            atom_of,
            atoms: atom_ids.len(),
        }
    }

    /// The partition of a supported conditioning field.
    pub fn field_partition(&self, field: Field) -> Result<Partition> {
        let n_sig = self.model.len();
        let time = |i: usize| if i == 0 { 0 } else { self.model.times[i - 1] };
        let (steps, signals) = match field {
            Field::MarketTerminal => (self.lattice.steps(), 0),
            Field::Terminal => (self.lattice.steps(), n_sig),
            Field::AtSignal(i) if i <= n_sig => (time(i), i),
            Field::MarketBeforeSignal(i) if (1..=n_sig).contains(&i) => (time(i), i - 1),
            other => {
                return Err(domain(format!(
                    "{other:?} is not defined for a model with {n_sig} signal times"
                )))
            }
        };
        Ok(self.partition(steps, signals))
    }

    /// Partition generated by everything observable at tree step `step`.
    pub fn information_at(&self, step: usize) -> Partition {
        self.partition(step, self.model.revealed_by(step))
    }
}

/// Conditional expectation of `m` given `field` under `measure`.
pub fn cond_expectation(
    space: &ScenarioSpace,
    m: &RandomVariable,
    field: Field,
    measure: Measure,
) -> Result<RandomVariable> {
    if m.values().len() != space.len() {
        return Err(domain("random variable does not match the scenario space"));
    }
    let partition = space.field_partition(field)?;
    let per_atom = partition.conditional_mean(&space.probabilities(measure), m.values())?;
    Ok(RandomVariable(partition.spread(&per_atom)))
}
