mod common;

use common::*;
use dynpricer::market::exact::{distribution_demand_welfare, expected_demand, expected_welfare_price};
use dynpricer::unit_demand::GumbelPriceDistribution;
use dynpricer::vector::softmax;
use dynpricer::{DemandOracle, RepOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rep_query_is_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    for case in 0..20 {
        let m = random_power_market(&mut rng, 2 + case % 3, 1 + case % 3);
        let d = m.dim();
        let p = price(&(0..d).map(|_| rng.gen_range(0.3..2.0)).collect::<Vec<_>>());
        let exact = expected_demand(&m, &p).unwrap();
        let mut oracle = RepOracle::new(&m, case as u64);
        let mut mean = vec![0.0; d];
        for _ in 0..n {
            let x = oracle.rep_query(&p).unwrap();
            mean.iter_mut().zip(x.iter()).for_each(|(m, x)| *m += x / n as f64);
        }
        let tol = 3.0 * m.feasible.norm_bound() / (n as f64).sqrt();
        for j in 0..d {
            assert!(
                (mean[j] - exact[j]).abs() <= tol,
                "case {case} good {j}: {} vs {}",
                mean[j],
                exact[j]
            );
        }
        assert_eq!(oracle.query_count(), n as u64);
    }
}

#[test]
fn identical_seeds_replay_identically() {
    let m = two_by_two();
    let prices: Vec<_> = (0..500).map(|k| price(&[0.2 + 0.01 * k as f64, 1.0])).collect();
    let run = |seed| {
        let mut o = RepOracle::new(&m, seed);
        prices.iter().map(|p| o.rep_query(p).unwrap().into_vec()).collect::<Vec<_>>()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn answers_depend_only_on_the_query_index() {
    // Query k draws from stream k, whatever prices came before it.
    let m = two_by_two();
    let mut a = RepOracle::new(&m, 3);
    let mut b = RepOracle::new(&m, 3);
    a.rep_query(&price(&[0.5, 0.5])).unwrap();
    b.rep_query(&price(&[3.0, 0.1])).unwrap();
    let p = price(&[0.7, 0.9]);
    for _ in 0..200 {
        assert_eq!(a.rep_query(&p).unwrap(), b.rep_query(&p).unwrap());
    }
    assert_eq!(a.stats().query_count, 201);
}

#[test]
fn exact_oracle_examples() {
    let m = example_one();
    assert!((expected_demand(&m, &price(&[1.0])).unwrap()[0] - 0.25).abs() < 1e-12);
    assert!((expected_welfare_price(&m, &price(&[1.0])).unwrap() - 0.25).abs() < 1e-12);
    assert!(expected_welfare_price(&m, &price(&[0.5])).unwrap().abs() < 1e-12);

    let m = power_market(&[vec![1.0], vec![2.0]], vec![0.0]);
    assert!((expected_demand(&m, &price(&[1.0])).unwrap()[0] - 0.625).abs() < 1e-12);

    let m = unit_demand(&[vec![0.9, 0.4], vec![0.3, 1.0]]);
    let p = price(&[1.5, 1.5, 0.0]);
    assert_eq!(expected_demand(&m, &p).unwrap().into_vec(), vec![0.0, 0.0, 1.0]);
    assert_eq!(expected_welfare_price(&m, &p).unwrap(), 0.0);
}

#[test]
fn vanishing_perturbation_matches_base_price() {
    let m = unit_demand(&[vec![1.0, 0.5], vec![0.2, 0.9]]);
    let base = [0.3, 0.6, 0.0];
    let dist = GumbelPriceDistribution::new(&base, 1e-6).unwrap();
    let est = distribution_demand_welfare(&m, &dist, 20_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let exact = expected_demand(&m, &price(&base)).unwrap();
    for j in 0..3 {
        assert!((est.demand[j] - exact[j]).abs() < 0.01);
    }
    assert!((est.welfare - expected_welfare_price(&m, &price(&base)).unwrap()).abs() < 0.01);
}

#[test]
fn perturbed_demand_is_a_softmax() {
    let m = unit_demand(&[vec![1.0, 0.5]]);
    let dist = GumbelPriceDistribution::new(&[0.5, 0.5, 0.0], 1.0).unwrap();
    let est = distribution_demand_welfare(&m, &dist, 1_000_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let expect = softmax(&[0.5, 0.0, 0.0], 1.0);
    for j in 0..3 {
        assert!((est.demand[j] - expect[j]).abs() < 0.01, "{:?} vs {expect:?}", est.demand);
    }
}

#[test]
fn perturbed_welfare_is_linear_in_demand() {
    // With one type, SW(D) = <v - c, x(D)>.
    let m = unit_demand(&[vec![0.8, 0.3]]);
    let dist = GumbelPriceDistribution::new(&[0.2, 0.1, 0.0], 0.3).unwrap();
    let est = distribution_demand_welfare(&m, &dist, 200_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let recomputed = 0.8 * est.demand[0] + 0.3 * est.demand[1];
    assert!((est.welfare - recomputed).abs() < 0.01);
    assert!(est.welfare_stderr > 0.0 && est.samples == 200_000);
}
