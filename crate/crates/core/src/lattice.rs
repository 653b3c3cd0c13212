//! Complete binomial market on a non-recombining tree.
//!
//! Prices are stored discounted by `(1 + rho)^t`, so the stored process is a
//! martingale under the risk-neutral up probability `q = (1 + rho - d) / (u - d)`.
//!
//! Market paths are indexed by an integer whose bits, most significant first,
//! record the moves (`1` = up). The node reached after `t` moves on path `id`
//! is therefore `(t, id >> (steps - t))`, and the children of node
//! `(t, prefix)` are `(t + 1, 2 * prefix)` (down) and `(t + 1, 2 * prefix + 1)` (up).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, HedgeError, Result};
use crate::numeric::{compensated_sum, weighted_sum};

/// Default cap on the number of tree steps (the tree has `2^steps` paths).
pub const DEFAULT_MAX_STEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeParams {
    /// Initial asset price.
    pub s0: f64,
    /// Gross up factor per step.
    pub u: f64,
    /// Gross down factor per step.
    pub d: f64,
    /// Simple interest rate per step.
    pub rho: f64,
    /// Number of trading periods.
    pub steps: usize,
    /// Physical probability of an up move.
    pub p_up: f64,
}

impl LatticeParams {
    /// Checks the parameter invariants without building anything.
    pub fn validate(&self, max_steps: usize) -> Result<()> {
        let finite = [self.s0, self.u, self.d, self.rho, self.p_up]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(domain("lattice parameters must be finite"));
        }
        if self.s0 <= 0.0 {
            return Err(domain(format!("s0 must be positive, got {}", self.s0)));
        }
        let growth = 1.0 + self.rho;
        if !(self.d > 0.0 && self.d < growth && growth < self.u) {
            return Err(HedgeError::Arbitrage(format!(
                "require 0 < d < 1 + rho < u, got d = {}, 1 + rho = {}, u = {}",
                self.d, growth, self.u
            )));
        }
        if !(self.p_up > 0.0 && self.p_up < 1.0) {
            return Err(domain(format!("p_up must lie in (0, 1), got {}", self.p_up)));
        }
        if self.steps == 0 {
            return Err(domain("steps must be at least 1"));
        }
        if self.steps > max_steps {
            return Err(HedgeError::Capacity(format!(
                "{} steps exceeds the cap of {max_steps}",
                self.steps
            )));
        }
        Ok(())
    }

    /// Risk-neutral up probability.
    pub fn risk_neutral_up(&self) -> f64 {
        (1.0 + self.rho - self.d) / (self.u - self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub id: usize,
    pub moves: Vec<Move>,
    /// Discounted prices `X_0, ..., X_N` along the path.
    pub prices: Vec<f64>,
    /// Physical probability.
    pub p: f64,
    /// Risk-neutral probability.
    pub r: f64,
}

impl MarketPath {
    pub fn terminal_price(&self) -> f64 {
        *self.prices.last().expect("paths have at least one price")
    }

    /// Moves rendered as a `u`/`d` string, e.g. `"ud"`.
    pub fn label(&self) -> String {
        node_label(self.moves.len(), self.id)
    }
}

/// Renders the node `(step, prefix)` as its move string.
pub fn node_label(step: usize, prefix: usize) -> String {
    (0..step)
        .rev()
        .map(|bit| if (prefix >> bit) & 1 == 1 { 'u' } else { 'd' })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Lattice {
    params: LatticeParams,
    q: f64,
    paths: Vec<MarketPath>,
    /// `node_prices[t][prefix]` is the discounted price at node `(t, prefix)`.
    node_prices: Vec<Vec<f64>>,
}

/// Builds the full tree with the default step cap.
pub fn build_lattice(params: LatticeParams) -> Result<Lattice> {
    Lattice::build(params, DEFAULT_MAX_STEPS)
}

impl Lattice {
    pub fn build(params: LatticeParams, max_steps: usize) -> Result<Self> {
        params.validate(max_steps)?;
        let n = params.steps;
        let q = params.risk_neutral_up();
        let up = params.u / (1.0 + params.rho);
        let down = params.d / (1.0 + params.rho);

        let mut node_prices = Vec::with_capacity(n + 1);
        node_prices.push(vec![params.s0]);
        for t in 0..n {
            let prev: &Vec<f64> = &node_prices[t];
            let next: Vec<f64> = (0..prev.len() * 2)
                .map(|child| {
                    let parent = prev[child >> 1];
                    if child & 1 == 1 {
                        parent * up
                    } else {
                        parent * down
                    }
                })
                .collect();
            node_prices.push(next);
        }

        let paths = (0..1usize << n)
            .into_par_iter()
            .map(|id| {
                let moves: Vec<Move> = (0..n)
                    .map(|t| {
                        if (id >> (n - 1 - t)) & 1 == 1 {
                            Move::Up
                        } else {
                            Move::Down
                        }
                    })
                    .collect();
                let ups = moves.iter().filter(|m| **m == Move::Up).count() as i32;
                let downs = n as i32 - ups;
                let p = params.p_up.powi(ups) * (1.0 - params.p_up).powi(downs);
                let r = q.powi(ups) * (1.0 - q).powi(downs);
                let prices = (0..=n).map(|t| node_prices[t][id >> (n - t)]).collect();
                MarketPath {
                    id,
                    moves,
                    prices,
                    p,
                    r,
                }
            })
            .collect();

        Ok(Self {
            params,
            q,
            paths,
            node_prices,
        })
    }

    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn steps(&self) -> usize {
        self.params.steps
    }

    /// Risk-neutral up probability.
    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn paths(&self) -> &[MarketPath] {
        &self.paths
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// Discounted price at node `(step, prefix)`.
    pub fn node_price(&self, step: usize, prefix: usize) -> f64 {
        self.node_prices[step][prefix]
    }

    /// Node prefix reached by `path` after `step` moves.
    pub fn prefix(&self, path: usize, step: usize) -> usize {
        path >> (self.params.steps - step)
    }

    /// Discount factor `(1 + rho)^-N` applied to nominal terminal payoffs.
    pub fn terminal_discount(&self) -> f64 {
        (1.0 + self.params.rho).powi(self.params.steps as i32).recip()
    }

    /// Nominal (undiscounted) terminal asset price on a path.
    pub fn nominal_terminal_price(&self, path: usize) -> f64 {
        self.paths[path].terminal_price() / self.terminal_discount()
    }

    pub fn physical_probabilities(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.p).collect()
    }

    pub fn risk_neutral_probabilities(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.r).collect()
    }

    fn check_claim(&self, payoff: &[f64]) -> Result<()> {
        if payoff.len() != self.paths.len() {
            return Err(domain(format!(
                "payoff has {} entries, lattice has {} paths",
                payoff.len(),
                self.paths.len()
            )));
        }
        if let Some((i, v)) = payoff
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(domain(format!("payoff on path {i} must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    /// Risk-neutral price `E^R[H]` of a terminal, market-measurable payoff.
    pub fn price(&self, payoff: &[f64]) -> Result<f64> {
        self.check_claim(payoff)?;
        let r: Vec<f64> = self.risk_neutral_probabilities();
        Ok(weighted_sum(&r, payoff))
    }

    /// Replicating strategy of a terminal payoff by backward induction.
    pub fn replicate(&self, payoff: &[f64]) -> Result<Strategy> {
        self.check_claim(payoff)?;
        let n = self.params.steps;
        let q = self.q;
        let mut values = vec![Vec::new(); n + 1];
        let mut positions = vec![Vec::new(); n];
        values[n] = payoff.to_vec();
        for t in (0..n).rev() {
            let next = &values[t + 1];
            let width = 1usize << t;
            let mut v = Vec::with_capacity(width);
            let mut xi = Vec::with_capacity(width);
            for prefix in 0..width {
                let v_down = next[2 * prefix];
                let v_up = next[2 * prefix + 1];
                let x_down = self.node_prices[t + 1][2 * prefix];
                let x_up = self.node_prices[t + 1][2 * prefix + 1];
                v.push(q * v_up + (1.0 - q) * v_down);
                xi.push((v_up - v_down) / (x_up - x_down));
            }
            values[t] = v;
            positions[t] = xi;
        }
        Ok(Strategy {
            v0: values[0][0],
            positions,
            values,
        })
    }

    /// `E^R[H | node]` for every node, computed by forward weighting of the
    /// terminal payoff over each node's subtree.
    pub fn conditional_values(&self, payoff: &[f64]) -> Vec<Vec<f64>> {
        let n = self.params.steps;
        (0..=n)
            .map(|t| {
                let span = 1usize << (n - t);
                (0..1usize << t)
                    .map(|prefix| {
                        let lo = prefix * span;
                        let sub = &self.paths[lo..lo + span];
                        let mass = compensated_sum(sub.iter().map(|p| p.r));
                        compensated_sum(sub.iter().zip(&payoff[lo..lo + span]).map(|(p, h)| p.r * h))
                            / mass
                    })
                    .collect()
            })
            .collect()
    }
}

/// Self-financing strategy on the tree, indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub v0: f64,
    /// `positions[t][prefix]`: units of the asset held over `(t, t + 1]`.
    pub positions: Vec<Vec<f64>>,
    /// `values[t][prefix]`: portfolio value at node `(t, prefix)`.
    pub values: Vec<Vec<f64>>,
}

impl Strategy {
    /// The do-nothing strategy with zero capital.
    pub fn zero(steps: usize) -> Self {
        Self {
            v0: 0.0,
            positions: (0..steps).map(|t| vec![0.0; 1 << t]).collect(),
            values: (0..=steps).map(|t| vec![0.0; 1 << t]).collect(),
        }
    }

    pub fn steps(&self) -> usize {
        self.positions.len()
    }

    /// Terminal value per market path id.
    pub fn terminal_values(&self) -> &[f64] {
        self.values.last().expect("value process has a terminal layer")
    }

    /// Terminal wealth obtained by rolling `v0 + Σ ξ_t (X_{t+1} - X_t)` forward
    /// along each path, independently of the stored value process.
    pub fn rolled_terminal_wealth(&self, lattice: &Lattice) -> Vec<f64> {
        let n = lattice.steps();
        lattice
            .paths()
            .iter()
            .map(|path| {
                let gains = (0..n).map(|t| {
                    let prefix = path.id >> (n - t);
                    self.positions[t][prefix] * (path.prices[t + 1] - path.prices[t])
                });
                compensated_sum(std::iter::once(self.v0).chain(gains))
            })
            .collect()
    }

    /// Largest relative violation of `V_{t+1} = V_t + ξ_t (X_{t+1} - X_t)`
    /// over every branch of the tree.
    pub fn self_financing_residual(&self, lattice: &Lattice) -> f64 {
        let mut worst = 0.0_f64;
        for t in 0..self.steps() {
            for (prefix, xi) in self.positions[t].iter().enumerate() {
                let v = self.values[t][prefix];
                let x = lattice.node_price(t, prefix);
                for child in [2 * prefix, 2 * prefix + 1] {
                    let expected = v + xi * (lattice.node_price(t + 1, child) - x);
                    let actual = self.values[t + 1][child];
                    let scale = 1.0_f64.max(actual.abs()).max(expected.abs());
                    worst = worst.max((actual - expected).abs() / scale);
                }
            }
        }
        worst
    }

    /// Smallest value anywhere in the value process.
    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Writes `step,node_prefix,position,value` rows; terminal nodes carry no position.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["step", "node_prefix", "position", "value"])?;
        for (t, layer) in self.values.iter().enumerate() {
            for (prefix, value) in layer.iter().enumerate() {
                let position = self
                    .positions
                    .get(t)
                    .map(|p| p[prefix].to_string())
                    .unwrap_or_default();
                out.write_record([
                    t.to_string(),
                    node_label(t, prefix),
                    position,
                    value.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
