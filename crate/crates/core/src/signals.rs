//! Non-market information revealed at a finite set of tree steps.
//!
//! A [`SignalModel`] is a finite Markov chain observed at steps
//! `t_1 < ... < t_n`. State labels are opaque; their meaning is fixed by the
//! claim that consumes them. Signals are independent of the market.

use serde::{Deserialize, Serialize};

use crate::error::{domain, HedgeError, Result};
use crate::numeric::compensated_sum;

/// Default cap on the number of enumerated signal paths.
pub const DEFAULT_MAX_SIGNAL_PATHS: usize = 100_000;

pub const ALIVE: &str = "alive";
pub const DEAD: &str = "dead";

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Strictly increasing tree steps at which a signal is observed.
    pub times: Vec<usize>,
    /// `states[i]` labels the possible values of the `i`-th signal.
    pub states: Vec<Vec<String>>,
    /// Law of the first signal over `states[0]`.
    pub initial: Vec<f64>,
    /// `transitions[i][a][b]`: probability that signal `i + 1` is `b` given signal `i` is `a`.
    pub transitions: Vec<Vec<Vec<f64>>>,
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(domain(format!("{what} has an entry outside [0, 1]")));
    }
    let total = compensated_sum(row.iter().copied());
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(domain(format!("{what} sums to {total}, expected 1")));
    }
    Ok(())
}

impl SignalModel {
    /// A model with no signal times: the information flow is purely market.
    pub fn none() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            initial: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn new(
        times: Vec<usize>,
        states: Vec<Vec<String>>,
        initial: Vec<f64>,
        transitions: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let model = Self {
            times,
            states,
            initial,
            transitions,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.times.first().is_some_and(|t| *t == 0) {
            return Err(domain("signal times must be at least 1"));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain("signal times must be strictly increasing"));
        }
        if self.states.len() != n {
            return Err(domain(format!(
                "{} signal times but {} state sets",
                n,
                self.states.len()
            )));
        }
        if n == 0 {
            if !self.initial.is_empty() || !self.transitions.is_empty() {
                return Err(domain("a model without signal times carries no probabilities"));
            }
            return Ok(());
        }
        if self.states.iter().any(|s| s.is_empty()) {
            return Err(domain("every signal needs at least one state"));
        }
        if self.initial.len() != self.states[0].len() {
            return Err(domain("initial law does not match the first state set"));
        }
        check_distribution(&self.initial, "initial law")?;
        if self.transitions.len() != n - 1 {
            return Err(domain(format!(
                "expected {} transition matrices, got {}",
                n - 1,
                self.transitions.len()
            )));
        }
        for (i, matrix) in self.transitions.iter().enumerate() {
            if matrix.len() != self.states[i].len() {
                return Err(domain(format!("transition {i} has the wrong number of rows")));
            }
            for (a, row) in matrix.iter().enumerate() {
                if row.len() != self.states[i + 1].len() {
                    return Err(domain(format!("transition {i} row {a} has the wrong width")));
                }
                check_distribution(row, &format!("transition {i} row {a}"))?;
            }
        }
        Ok(())
    }

    /// Checks that every signal time falls within a tree of `steps` periods.
    pub fn check_horizon(&self, steps: usize) -> Result<()> {
        match self.times.last() {
            Some(last) if *last > steps => Err(domain(format!(
                "signal time {last} lies beyond the horizon of {steps} steps"
            ))),
            _ => Ok(()),
        }
    }

    /// Replaces the observation times, keeping the chain.
    pub fn at_times(mut self, times: Vec<usize>) -> Result<Self> {
        if times.len() != self.times.len() {
            return Err(domain(format!(
                "expected {} signal times, got {}",
                self.times.len(),
                times.len()
            )));
        }
        self.times = times;
        self.validate()?;
        Ok(self)
    }

    /// Label of state `state` of the `index`-th signal.
    pub fn label(&self, index: usize, state: usize) -> &str {
        &self.states[index][state]
    }

    /// Number of signals observed at or before `step`.
    pub fn revealed_by(&self, step: usize) -> usize {
        self.times.partition_point(|t| *t <= step)
    }
}

/// Two-state absorbing survival chain observed at steps `1..=n_periods`.
///
/// `death_probs[i]` is the probability of dying during period `i` given
/// survival to its start.
pub fn mortality_model(n_periods: usize, death_probs: &[f64]) -> Result<SignalModel> {
    if death_probs.len() != n_periods {
        return Err(domain(format!(
            "{n_periods} periods but {} death probabilities",
            death_probs.len()
        )));
    }
    if let Some(q) = death_probs
        .iter()
        .find(|q| !q.is_finite() || **q < 0.0 || **q > 1.0)
    {
        return Err(domain(format!("death probability {q} outside [0, 1]")));
    }
    if n_periods == 0 {
        return Ok(SignalModel::none());
    }
    let labels = vec![ALIVE.to_string(), DEAD.to_string()];
    SignalModel::new(
        (1..=n_periods).collect(),
        vec![labels; n_periods],
        vec![1.0 - death_probs[0], death_probs[0]],
        death_probs[1..]
            .iter()
            .map(|q| vec![vec![1.0 - q, *q], vec![0.0, 1.0]])
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalPath {
    pub id: usize,
    /// State index of each signal.
    pub states: Vec<usize>,
    /// Probability under P (and under the extended R).
    pub pi: f64,
}

impl SignalPath {
    /// Whether the last observed state is labelled `alive`. A path with no
    /// signals counts as alive.
    pub fn is_alive(&self, model: &SignalModel) -> bool {
        match self.states.last() {
            None => true,
            Some(&s) => model.label(self.states.len() - 1, s) == ALIVE,
        }
    }

    pub fn label(&self, model: &SignalModel) -> String {
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| model.label(i, *s))
            .collect::<Vec<_>>()
            .join("/")
    }
}

/// Enumerates every positive-probability signal path with the default cap.
pub fn enumerate_signal_paths(model: &SignalModel) -> Result<Vec<SignalPath>> {
    enumerate_signal_paths_capped(model, DEFAULT_MAX_SIGNAL_PATHS)
}

/// Depth-first enumeration in lexicographic state order; zero-probability
/// branches are pruned.
pub fn enumerate_signal_paths_capped(model: &SignalModel, cap: usize) -> Result<Vec<SignalPath>> {
    model.validate()?;
    let n = model.len();
    if n == 0 {
        return Ok(vec![SignalPath {
            id: 0,
            states: Vec::new(),
            pi: 1.0,
        }]);
    }
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, f64)> = model
        .initial
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, p)| **p > 0.0)
        .map(|(s, p)| (vec![s], *p))
        .collect();
    while let Some((states, pi)) = stack.pop() {
        if states.len() == n {
            if out.len() == cap {
                return Err(HedgeError::Capacity(format!(
                    "more than {cap} signal paths"
                )));
            }
            out.push(SignalPath {
                id: out.len(),
                states,
                pi,
            });
            continue;
        }
        let last = *states.last().unwrap();
        let row = &model.transitions[states.len() - 1][last];
        for (next, p) in row.iter().enumerate().rev() {
            if *p > 0.0 {
                let mut extended = states.clone();
                extended.push(next);
                stack.push((extended, pi * p));
            }
        }
    }
    Ok(out)
}
