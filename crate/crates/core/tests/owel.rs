mod common;

use common::*;
use dynpricer::bun_to_price::BtpBudget;
use dynpricer::ground_truth::{opt_lottery, sw_of_bundle};
use dynpricer::market::exact::{expected_demand, expected_welfare_price};
use dynpricer::owel::*;
use dynpricer::vector::{norm1, norm2, sub};
use dynpricer::{MarketInstance, SupplyVector};

fn inner() -> BtpBudget {
    BtpBudget { restarts: 3, iterations: 1000, validation: 500, step: 0.25 }
}

fn run(m: &MarketInstance, s: &SupplyVector, alpha: f64, t: usize, seed: u64) -> (OwelPlan, OwelResult) {
    owel(m, s, &OwelConfig::new(alpha, 0.1).desk(t, 0.3, inner()), seed).unwrap()
}

#[test]
fn example_one_reaches_the_optimum() {
    let m = example_one();
    let s = supply(&[1.0]);
    let (plan, r) = run(&m, &s, 0.05, 100, 0);
    let sw = expected_welfare_price(&m, &r.price).unwrap();
    assert!(sw >= 0.25 - 0.05, "SW {sw} at price {:?}", r.price);
    assert!(expected_demand(&m, &r.price).unwrap()[0] <= 1.0);
    assert!(plan.epsilon < plan.xi);
    assert_eq!(r.queries, plan.queries());
    assert_eq!(r.trace.steps.len(), 100);
    for step in &r.trace.steps {
        assert!(plan.shrunk.contains(&step.bundle));
    }
}

#[test]
fn example_one_tail_does_not_diverge() {
    let m = example_one();
    let (_, r) = run(&m, &supply(&[1.0]), 0.05, 100, 1);
    let steps = &r.trace.steps;
    let tail = &steps[steps.len() * 3 / 4..];
    let slack = 2.0 * tail.iter().map(|s| s.inner_distance).fold(0.0, f64::max);
    let mut sum = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for (k, step) in steps.iter().enumerate() {
        sum += step.bundle[0];
        if k >= steps.len() * 3 / 4 {
            let sw = sw_of_bundle(&m, &[sum / (k + 1) as f64]).unwrap();
            assert!(sw >= prev - slack, "iteration {k}: {sw} after {prev}");
            prev = prev.max(sw);
        }
    }
}

#[test]
fn inducing_pairs_have_matching_welfare() {
    // |SW(p) - SW(x_hat)| is at most the Hölder modulus of the inducing error.
    let m = two_by_two();
    let reg = m.regularity();
    let (_, r) = run(&m, &supply(&[1.0, 1.0]), 0.1, 20, 2);
    for step in &r.trace.steps {
        let p = price(&step.price);
        let induced = expected_demand(&m, &p).unwrap();
        let diff = sub(&induced, &step.bundle);
        let modulus = 2f64.powf(1.0 - reg.beta) * reg.lambda * norm1(&diff).powf(reg.beta) + norm2(&m.costs) * norm2(&diff);
        let gap = (expected_welfare_price(&m, &p).unwrap() - sw_of_bundle(&m, &step.bundle).unwrap()).abs();
        assert!(gap <= modulus + 1e-6, "{gap} > {modulus}");
    }
}

#[test]
fn cost_pricing_optimum_is_recovered() {
    // Demand at p = c is (0.68, 0.82) < s, so SW(c) is the optimum.
    let m = power_market(&[vec![1.0, 0.8], vec![0.6, 1.2]], vec![0.5, 0.5]);
    let s = supply(&[1.0, 1.0]);
    let at_cost = expected_welfare_price(&m, &price(&[0.5, 0.5])).unwrap();
    assert!((opt_lottery(&m, &s).unwrap() - at_cost).abs() < 1e-6);
    let (_, r) = run(&m, &s, 0.1, 100, 3);
    let sw = expected_welfare_price(&m, &r.price).unwrap();
    assert!(sw >= at_cost - 0.1, "{sw} vs {at_cost}");
    let x = expected_demand(&m, &r.price).unwrap();
    assert!(x.iter().zip(s.iter()).all(|(x, s)| x <= s));
}

#[test]
fn binding_supply_prices_above_cost() {
    let m = power_market(&[vec![1.0], vec![1.0]], vec![1.0]);
    let s = supply(&[0.1]);
    let cfg = OwelConfig::new(0.05, 0.1).desk(100, 0.1, inner());
    let (plan, r) = owel(&m, &s, &cfg, 4).unwrap();
    assert!((r.average_bundle[0] - (0.1 - plan.xi)).abs() < 0.05, "{:?}", r.average_bundle);
    assert!(r.price[0] > 1.0);
    assert!(expected_demand(&m, &r.price).unwrap()[0] <= 0.1 + 0.01);
}

#[test]
fn examples_of_the_supergradient_and_shrink_loss() {
    assert_eq!(welfare_supergradient(&[1.0], &[1.0]).unwrap(), vec![0.0]);
    assert_eq!(welfare_supergradient(&[2.0], &[1.0]).unwrap(), vec![1.0]);
    assert_eq!(shrink_loss_bound(0.0, 1.0, 1.0, 1, &[1.0]), 0.0);
    assert!((shrink_loss_bound(0.01, 1.0, 1.0, 1, &[1.0]) - 0.02).abs() < 1e-12);
    for alpha in [0.01, 0.05, 0.2] {
        for (lambda, beta, d) in [(1.0, 0.5, 1), (2.0, 0.5, 3), (1.5, 1.0, 2)] {
            for c in [vec![0.0; d], vec![0.5; d]] {
                let xi = default_xi(alpha, lambda, beta, d, &c);
                assert!(shrink_loss_bound(xi.chosen, lambda, beta, d, &c) <= alpha / 4.0 + 1e-12);
                assert!(xi.chosen <= xi.formula);
            }
        }
    }
}

#[test]
fn same_seed_same_run() {
    let m = two_by_two();
    let s = supply(&[1.0, 1.0]);
    let (_, a) = run(&m, &s, 0.1, 10, 7);
    let (_, b) = run(&m, &s, 0.1, 10, 7);
    assert_eq!(a, b);
}
