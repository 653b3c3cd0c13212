//! Seeded random problem instances shared by the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ratiohedge::claims::Claim;
use ratiohedge::lattice::{build_lattice, Lattice, LatticeParams};
use ratiohedge::scenario::{build_scenario_space, ScenarioSpace};
use ratiohedge::signals::{mortality_model, SignalModel};
use ratiohedge::superhedge::superhedge_price;

pub struct Instance {
    pub seed: u64,
    pub lattice: Lattice,
    pub space: ScenarioSpace,
    pub claim: Claim,
    /// `E^R[D̄]`.
    pub full_price: f64,
}

pub fn one_step_call_space() -> ScenarioSpace {
    let lat = build_lattice(LatticeParams {
        s0: 100.0,
        u: 2.0,
        d: 0.5,
        rho: 0.0,
        steps: 1,
        p_up: 0.5,
    })
    .unwrap();
    build_scenario_space(&lat, &mortality_model(1, &[0.2]).unwrap()).unwrap()
}

fn random_distribution(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    // occasional exact zeros exercise path pruning
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.05..1.0) })
        .collect();
    if w.iter().all(|x| *x == 0.0) {
        w[rng.gen_range(0..len)] = 1.0;
    }
    let total: f64 = w.iter().sum();
    let mut out: Vec<f64> = w.iter().map(|x| x / total).collect();
    // make the row sum to 1 up to rounding in the last nonzero entry
    let last = out.iter().rposition(|x| *x > 0.0).unwrap();
    let rest: f64 = out.iter().enumerate().filter(|(i, _)| *i != last).map(|(_, x)| x).sum();
    out[last] = 1.0 - rest;
    out
}

pub fn random_lattice(rng: &mut impl Rng, max_steps: usize) -> Lattice {
    let rho = rng.gen_range(0.0..0.05);
    let d = rng.gen_range(0.7..0.98);
    let u = (1.0 + rho) * rng.gen_range(1.03..1.4);
    build_lattice(LatticeParams {
        s0: rng.gen_range(50.0..150.0),
        u,
        d,
        rho,
        steps: rng.gen_range(1..=max_steps),
        p_up: rng.gen_range(0.2..0.8),
    })
    .unwrap()
}

/// Random chain with at most `max_times` signal times and `max_states` states each.
pub fn random_signals(rng: &mut impl Rng, steps: usize, max_times: usize, max_states: usize) -> SignalModel {
    let n = rng.gen_range(0..=max_times.min(steps));
    let mut times: Vec<usize> = (1..=steps).collect();
    while times.len() > n {
        let drop = rng.gen_range(0..times.len());
        times.remove(drop);
    }
    if n == 0 {
        return SignalModel::none();
    }
    let sizes: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=max_states)).collect();
    let states = sizes
        .iter()
        .enumerate()
        .map(|(i, k)| (0..*k).map(|j| format!("s{i}_{j}")).collect())
        .collect();
    let initial = random_distribution(rng, sizes[0]);
    let transitions = (1..n)
        .map(|i| (0..sizes[i - 1]).map(|_| random_distribution(rng, sizes[i])).collect())
        .collect();
    SignalModel::new(times, states, initial, transitions).unwrap()
}

/// Random claim in `[0, 100]`: about a fifth zeros, and occasionally a
/// coarse grid so that payoff levels and slopes tie.
pub fn random_claim(rng: &mut impl Rng, space: &ScenarioSpace) -> Claim {
    let coarse = rng.gen_bool(0.25);
    let values = (0..space.len())
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else if coarse {
                (rng.gen_range(1..=4) * 25) as f64
            } else {
                rng.gen_range(0.0..100.0)
            }
        })
        .collect();
    Claim::new(space, values, "random").unwrap()
}

/// The instance family: up to 3 steps, up to 2 signal times, up to 3 states.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = random_lattice(&mut rng, 3);
    let model = random_signals(&mut rng, lattice.steps(), 2, 3);
    let space = build_scenario_space(&lattice, &model).unwrap();
    let claim = random_claim(&mut rng, &space);
    let full_price = superhedge_price(&space, &claim);
    Instance {
        seed,
        lattice,
        space,
        claim,
        full_price,
    }
}

/// A budget drawn uniformly from `[0, E^R[D̄]]`, reproducible per instance.
pub fn random_budget(inst: &Instance, salt: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed ^ (salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    rng.gen_range(0.0..=1.0) * inst.full_price
}

/// Superhedging cost of `m` for a seller who may adapt to each signal as it
/// arrives: backward induction over the joint information tree, taking the
/// worst signal outcome at each signal step.
pub fn adaptive_superhedge_price(space: &ScenarioSpace, m: &[f64]) -> f64 {
    let lattice = space.lattice();
    let n = lattice.steps();
    let q = lattice.q();
    let model = space.signal_model();
    // value keyed by scenario index; collapse step by step
    let mut value: Vec<f64> = m.to_vec();
    for t in (0..n).rev() {
        let fine = space.information_at(t + 1);
        let coarse = space.information_at(t);
        let revealed_now = model.revealed_by(t + 1) > model.revealed_by(t);
        let mut per_fine = vec![f64::NEG_INFINITY; fine.atom_count()];
        for (j, v) in value.iter().enumerate() {
            let a = fine.atom_of(j);
            per_fine[a] = per_fine[a].max(*v);
        }
        // for each coarse atom: worst case over the signal revealed at t + 1,
        // then the risk-neutral average over the market move
        let mut up = vec![f64::NEG_INFINITY; coarse.atom_count()];
        let mut down = vec![f64::NEG_INFINITY; coarse.atom_count()];
        for (j, sc) in space.scenarios().iter().enumerate() {
            let c = coarse.atom_of(j);
            let v = per_fine[fine.atom_of(j)];
            let went_up = (sc.market >> (n - t - 1)) & 1 == 1;
            let slot = if went_up { &mut up[c] } else { &mut down[c] };
            if revealed_now {
                *slot = slot.max(v);
            } else {
                *slot = v;
            }
        }
        value = space
            .scenarios()
            .iter()
            .enumerate()
            .map(|(j, _)| {
                let c = coarse.atom_of(j);
                q * up[c] + (1.0 - q) * down[c]
            })
            .collect();
    }
    value[0]
}
