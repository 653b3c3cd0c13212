//! Terminal contingent claims `D(x, s) >= 0`, stored discounted.
//!
//! Benefits paid before maturity must be supplied as their discounted
//! terminal equivalents.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use crate::error::{domain, Result};
use crate::scenario::{RandomVariable, ScenarioSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    values: Vec<f64>,
    pub description: String,
}

impl Claim {
    pub fn new(space: &ScenarioSpace, values: Vec<f64>, description: impl Into<String>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(domain(format!(
                "claim has {} values for {} scenarios",
                values.len(),
                space.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(domain(format!(
                "claim value {} at scenario {i} is not a finite nonnegative number",
                values[i]
            )));
        }
        Ok(Self {
            values,
            description: description.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_random_variable(&self) -> RandomVariable {
        RandomVariable::new(self.values.clone()).expect("claims are finite")
    }

    /// Writes `market_path_id,signal_path_id,value` rows.
    pub fn write_csv<W: std::io::Write>(&self, space: &ScenarioSpace, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["market_path_id", "signal_path_id", "value"])?;
        for (sc, v) in space.scenarios().iter().zip(&self.values) {
            out.write_record([sc.market.to_string(), sc.signal.to_string(), v.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Discounted call on the terminal price, paid only if the last signal is `alive`.
pub fn unit_linked_call(space: &ScenarioSpace, strike: f64) -> Result<Claim> {
    if !strike.is_finite() || strike < 0.0 {
        return Err(domain(format!("strike must be >= 0, got {strike}")));
    }
    let lattice = space.lattice();
    let model = space.signal_model();
    let discount = lattice.terminal_discount();
    let values = space
        .scenarios()
        .iter()
        .map(|sc| {
            if space.signal_paths()[sc.signal].is_alive(model) {
                (lattice.nominal_terminal_price(sc.market) - strike).max(0.0) * discount
            } else {
                0.0
            }
        })
        .collect();
    Claim::new(space, values, format!("unit-linked call, strike {strike}"))
}

/// Discounted fixed benefit paid on survival to maturity.
pub fn pure_endowment(space: &ScenarioSpace, benefit: f64) -> Result<Claim> {
    if !benefit.is_finite() || benefit < 0.0 {
        return Err(domain(format!("benefit must be >= 0, got {benefit}")));
    }
    let model = space.signal_model();
    let paid = benefit * space.lattice().terminal_discount();
    let values = space
        .scenarios()
        .iter()
        .map(|sc| {
            if space.signal_paths()[sc.signal].is_alive(model) {
                paid
            } else {
                0.0
            }
        })
        .collect();
    Claim::new(space, values, format!("pure endowment, benefit {benefit}"))
}

/// Claim given by explicit `(market_path_id, signal_path_id) -> value`
/// entries; unlisted scenarios pay 0.
pub fn claim_from_table(space: &ScenarioSpace, table: &BTreeMap<(usize, usize), f64>) -> Result<Claim> {
    let mut values = vec![0.0; space.len()];
    for (&(market, signal), &v) in table {
        if market >= space.market_count() || signal >= space.signal_count() {
            return Err(domain(format!(
                "unknown scenario (market {market}, signal {signal})"
            )));
        }
        if !v.is_finite() || v < 0.0 {
            return Err(domain(format!(
                "value {v} for (market {market}, signal {signal}) is negative or not finite"
            )));
        }
        values[space.index(market, signal)] = v;
    }
    Claim::new(space, values, "tabulated claim")
}

#[derive(Debug, Deserialize)]
struct TableRow {
    market_path_id: usize,
    signal_path_id: usize,
    value: f64,
}

/// Reads a claim table CSV with columns `market_path_id,signal_path_id,value`.
pub fn read_claim_table<R: Read>(reader: R) -> Result<BTreeMap<(usize, usize), f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut table = BTreeMap::new();
    for (line, row) in rdr.deserialize::<TableRow>().enumerate() {
        let row = row.map_err(|e| domain(format!("claim table row {}: {e}", line + 1)))?;
        if table
            .insert((row.market_path_id, row.signal_path_id), row.value)
            .is_some()
        {
            return Err(domain(format!(
                "duplicate claim entry for (market {}, signal {})",
                row.market_path_id, row.signal_path_id
            )));
        }
    }
    Ok(table)
}
