mod common;

use common::*;
use dynpricer::bun_to_price::BtpBudget;
use dynpricer::ground_truth::opt_lottery;
use dynpricer::market::exact::distribution_demand_welfare;
use dynpricer::owel::OwelConfig;
use dynpricer::unit_demand::*;
use dynpricer::valuations::unit_demand_choice;
use dynpricer::vector::{argmax, entropy, norm1, softmax};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn utilities(v: &[f64], p: &[f64]) -> Vec<f64> {
    v.iter().zip(p).map(|(v, p)| v - p).collect()
}

#[test]
fn gumbel_choices_follow_the_softmax() {
    let (cases, draws) = (50, 100_000);
    let tol = 4.0 * ((2.0 * cases as f64 * 3.0 / 0.01).ln() / (2.0 * draws as f64)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..cases {
        let v = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0];
        let p = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0];
        let eta = rng.gen_range(0.05..1.0);
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[unit_demand_choice(&v, &sample_perturbed_price(&p, eta, &mut rng))] += 1;
        }
        let expect = softmax(&utilities(&v, &p), eta);
        for j in 0..3 {
            let freq = counts[j] as f64 / draws as f64;
            assert!((freq - expect[j]).abs() <= tol, "case {case} item {j}: {freq} vs {}", expect[j]);
        }
    }
}

#[test]
fn convert_preserves_unique_choices() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 10_000 {
        let items = rng.gen_range(2..6);
        let mut v: Vec<f64> = (0..items).map(|_| rng.gen_range(0.0..2.0)).collect();
        v[items - 1] = 0.0;
        let p: Vec<f64> = (0..items).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let u = utilities(&v, &p);
        let best = argmax(&u);
        if u.iter().enumerate().any(|(j, x)| j != best && *x == u[best]) {
            continue;
        }
        let q = convert(&p);
        assert_eq!(q[items - 1], 0.0);
        assert!(q.iter().all(|x| *x >= 0.0));
        assert_eq!(unit_demand_choice(&v, &q), best);
        checked += 1;
    }
}

#[test]
fn convert_examples() {
    assert_eq!(convert(&[1.0, -2.0, 0.5]).into_vec(), vec![3.0, 0.0, 0.0]);
    assert_eq!(convert(&[0.4, 0.1, 0.0]).into_vec(), vec![0.4, 0.1, 0.0]);
    assert_eq!(convert(&[0.0, 0.0, 0.0]).into_vec(), vec![0.0, 0.0, 0.0]);
}

#[test]
fn sim_mean_is_the_regularized_demand() {
    let m = unit_demand(&[vec![0.9, 0.4], vec![0.2, 0.7]]);
    let p = [0.3, 0.1, 0.0];
    let eta = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400_000;
    let mut mean = [0.0; 3];
    for _ in 0..n {
        for (m, x) in mean.iter_mut().zip(sim(&m, &p, eta, &mut rng).unwrap()) {
            *m += x / n as f64;
        }
    }
    let expect = regularized_expected_demand(&m, &p, eta).unwrap();
    for j in 0..3 {
        assert!((mean[j] - expect[j]).abs() < 0.005, "{mean:?} vs {expect:?}");
    }
}

#[test]
fn sim_at_tiny_temperature_is_the_plain_choice() {
    let m = unit_demand(&[vec![0.9, 0.4], vec![0.2, 0.7]]);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mean = [0.0; 3];
    for _ in 0..20_000 {
        for (m, x) in mean.iter_mut().zip(sim(&m, &[0.1, 0.1, 0.0], 1e-6, &mut rng).unwrap()) {
            *m += x / 20_000.0;
        }
    }
    assert!((mean[0] - 0.5).abs() < 0.02 && (mean[1] - 0.5).abs() < 0.02 && mean[2] == 0.0);
}

#[test]
fn entropy_is_half_holder() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let point = |rng: &mut ChaCha8Rng, n: usize| {
        let e: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    for _ in 0..10_000 {
        let n = rng.gen_range(2..6);
        let (x, y) = (point(&mut rng, n), point(&mut rng, n));
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let bound = (n as f64).sqrt() * norm1(&diff).sqrt();
        assert!((entropy(&x) - entropy(&y)).abs() <= bound + 1e-12);
    }
}

#[test]
fn regularized_program_saturates() {
    let m = unit_demand(&[vec![0.9, 0.4], vec![0.4, 0.9]]);
    assert!(regularized_scp_saturation_check(&m, &[1.0 / 3.0; 3], 0.1).unwrap());
    assert!(regularized_scp_saturation_check(&m, &[0.0, 0.0, 1.0], 0.1).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let e: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = e.iter().sum();
        let x: Vec<f64> = e.iter().map(|v| v / s).collect();
        assert!(regularized_scp_saturation_check(&m, &x, 0.1).unwrap(), "{x:?}");
    }
}

fn desk_config(alpha: f64) -> OwelConfig {
    let mut cfg = OwelConfig::new(alpha, 0.1).desk(50, 0.1, BtpBudget { restarts: 3, iterations: 1000, validation: 500, step: 0.09 });
    cfg.xi = Some(0.02);
    cfg.final_inner = Some(BtpBudget { restarts: 3, iterations: 10_000, validation: 5_000, step: 0.09 });
    cfg
}

fn instances() -> Vec<(dynpricer::MarketInstance, dynpricer::SupplyVector, f64)> {
    vec![
        (unit_demand(&[vec![1.0, 0.2], vec![0.2, 1.0]]), supply(&[1.0, 1.0, 1.0]), 1.0),
        (unit_demand(&[vec![1.0, 0.2], vec![0.2, 1.0]]), supply(&[0.5, 0.5, 1.0]), 1.0),
        (unit_demand(&[vec![1.0, 0.1], vec![1.0, 0.1]]), supply(&[0.5, 1.0, 1.0]), 0.55),
    ]
}

#[test]
fn owel_ud_examples() {
    for (k, (m, s, opt)) in instances().into_iter().enumerate() {
        assert!((opt_lottery(&m, &s).unwrap() - opt).abs() < 1e-9);
        let (plan, r) = owel_ud(&m, &s, &desk_config(0.2), k as u64).unwrap();
        assert!((plan.eta - 0.1 / 3f64.ln()).abs() < 1e-12);
        assert_eq!(r.distribution.eta(), plan.eta);
        let est = distribution_demand_welfare(&m, &r.distribution, 100_000, &mut ChaCha8Rng::seed_from_u64(k as u64)).unwrap();
        assert!(est.welfare >= opt - 0.2 - 3.0 * est.welfare_stderr, "instance {k}: {}", est.welfare);
        for j in 0..3 {
            assert!(est.demand[j] <= s[j] + 0.02, "instance {k}: {:?}", est.demand);
        }
    }
}

#[test]
fn exact_softmax_oracle_gap_accounting() {
    // Without sampling noise the deficit is at most eps + eta ln(d + 1).
    for (k, (m, s, opt)) in instances().into_iter().enumerate() {
        let plan = OwelUdPlan::new(&m, &s, &desk_config(0.2)).unwrap();
        let mut oracle = SoftmaxOracle::new(&m, plan.eta).unwrap();
        let r = owel_ud_with_oracle(&mut oracle, &plan).unwrap();
        let est = distribution_demand_welfare(&m, &r.distribution, 100_000, &mut ChaCha8Rng::seed_from_u64(40)).unwrap();
        let allowance = plan.owel.alpha + plan.eta * 3f64.ln() + 3.0 * est.welfare_stderr;
        assert!(est.welfare >= opt - allowance, "instance {k}: {} < {opt} - {allowance}", est.welfare);
    }
}

proptest! {
    #[test]
    fn convert_is_nonnegative_and_shift_invariant(
        p in proptest::collection::vec(-10.0f64..10.0, 2..6),
        shift in -5.0f64..5.0,
    ) {
        let q = convert(&p);
        prop_assert!(q.iter().all(|x| *x >= 0.0));
        prop_assert_eq!(q[p.len() - 1], 0.0);
        let shifted: Vec<f64> = p.iter().map(|x| x + shift).collect();
        let r = convert(&shifted);
        for (a, b) in q.iter().zip(r.iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn closed_form_welfare_matches_sampling() {
    let mut m = unit_demand(&[vec![0.9, 0.4], vec![0.3, 0.8]]);
    m.costs = dynpricer::CostVector::new(vec![0.1, 0.2, 0.0]).unwrap();
    let base = [0.4, 0.3, 0.0];
    let dist = GumbelPriceDistribution::new(&base, 0.15).unwrap();
    let est = distribution_demand_welfare(&m, &dist, 400_000, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let exact = perturbed_welfare(&m, &base, 0.15).unwrap();
    assert!((est.welfare - exact).abs() <= 4.0 * est.welfare_stderr, "{} vs {exact}", est.welfare);
    let demand = regularized_expected_demand(&m, &base, 0.15).unwrap();
    for j in 0..3 {
        assert!((est.demand[j] - demand[j]).abs() <= 4.0 * est.demand_stderr[j] + 1e-12);
    }
}
