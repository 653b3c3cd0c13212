mod common;

use common::random_instance;
use proptest::prelude::*;
use ratiohedge::scenario::{cond_expectation, Field, Measure, RandomVariable};

fn payoff(inst: &common::Instance, salt: u64) -> Vec<f64> {
    (0..inst.lattice.path_count())
        .map(|x| ((x as u64 * 37 + salt) % 101) as f64)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replication_is_exact_and_self_financing(seed in any::<u64>(), salt in 0u64..1000) {
        let inst = random_instance(seed);
        let h = payoff(&inst, salt);
        let strategy = inst.lattice.replicate(&h).unwrap();
        let scale = h.iter().cloned().fold(1.0, f64::max);
        let rolled = strategy.rolled_terminal_wealth(&inst.lattice);
        for (v, target) in rolled.iter().zip(&h) {
            prop_assert!((v - target).abs() <= 1e-9 * scale);
        }
        prop_assert!(strategy.self_financing_residual(&inst.lattice) <= 1e-9 * scale);
        prop_assert!((strategy.v0 - inst.lattice.price(&h).unwrap()).abs() <= 1e-9 * scale);
    }

    #[test]
    fn pricing_is_linear(seed in any::<u64>(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let inst = random_instance(seed);
        let h1 = payoff(&inst, 1);
        let h2 = payoff(&inst, 2);
        let mix: Vec<f64> = h1.iter().zip(&h2).map(|(x, y)| a * x + b * y).collect();
        let lhs = inst.lattice.price(&mix).unwrap();
        let rhs = a * inst.lattice.price(&h1).unwrap() + b * inst.lattice.price(&h2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn discounted_price_is_a_martingale_under_r(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let n = inst.lattice.steps();
        let terminal: Vec<f64> = inst.lattice.paths().iter().map(|p| p.prices[n]).collect();
        let s0 = inst.lattice.paths()[0].prices[0];
        prop_assert!((inst.lattice.price(&terminal).unwrap() - s0).abs() <= 1e-9 * s0);
    }

    #[test]
    fn tower_property(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let space = &inst.space;
        let y = inst.claim.as_random_variable();
        for i in 1..=space.signal_model().len() {
            for measure in [Measure::Physical, Measure::RiskNeutral] {
                let fine = cond_expectation(space, &y, Field::AtSignal(i), measure).unwrap();
                let twice = cond_expectation(space, &fine, Field::MarketBeforeSignal(i), measure).unwrap();
                let once = cond_expectation(space, &y, Field::MarketBeforeSignal(i), measure).unwrap();
                for (a, b) in twice.values().iter().zip(once.values()) {
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
                }
            }
        }
        let full = cond_expectation(space, &y, Field::Terminal, Measure::Physical).unwrap();
        for (a, b) in full.values().iter().zip(y.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        let market = cond_expectation(space, &y, Field::MarketTerminal, Measure::RiskNeutral).unwrap();
        let mean = space.expectation(market.values(), Measure::RiskNeutral);
        prop_assert!((mean - space.expectation(y.values(), Measure::RiskNeutral)).abs() <= 1e-9 * (1.0 + mean));
    }

    #[test]
    fn change_of_measure(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let space = &inst.space;
        let y = inst.claim.values();
        let weighted: Vec<f64> = space.scenarios().iter().zip(y).map(|(sc, v)| v * sc.dp_dr()).collect();
        let direct = space.expectation(y, Measure::Physical);
        prop_assert!((space.expectation(&weighted, Measure::RiskNeutral) - direct).abs() <= 1e-9 * (1.0 + direct));
        for sc in space.scenarios() {
            prop_assert!((sc.dp_dr() * sc.dr_dp() - 1.0).abs() <= 1e-12);
        }
        let total_p: f64 = space.probabilities(Measure::Physical).iter().sum();
        let total_r: f64 = space.probabilities(Measure::RiskNeutral).iter().sum();
        prop_assert!((total_p - 1.0).abs() <= 1e-12 && (total_r - 1.0).abs() <= 1e-12);
        let one = RandomVariable::constant(space, 1.0);
        prop_assert!((space.expectation(one.values(), Measure::RiskNeutral) - 1.0).abs() <= 1e-12);
    }
}
