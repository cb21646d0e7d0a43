#![allow(dead_code)]

use dynpricer::{
    BuyerDistribution, CostVector, FeasibleSet, MarketInstance, PriceVector, SupplyVector, Valuation,
};
use rand::Rng;

/// One buyer with `v(x) = sqrt(x)` on `[0, 1]`, unit cost, unit supply.
pub fn example_one() -> MarketInstance {
    MarketInstance::new(
        BuyerDistribution::single(Valuation::separable_power(vec![1.0], 0.5).unwrap()).unwrap(),
        CostVector::new(vec![1.0]).unwrap(),
        SupplyVector::new(vec![1.0]).unwrap(),
        FeasibleSet::unit_box(1),
        1.0,
    )
    .unwrap()
}

/// Equal-weight square-root buyers over the unit box.
pub fn power_market(coeffs: &[Vec<f64>], costs: Vec<f64>) -> MarketInstance {
    let d = coeffs[0].len();
    let vals = coeffs
        .iter()
        .map(|a| Valuation::separable_power(a.clone(), 0.5).unwrap())
        .collect();
    MarketInstance::new(
        BuyerDistribution::uniform(vals).unwrap(),
        CostVector::new(costs).unwrap(),
        SupplyVector::new(vec![1.0; d]).unwrap(),
        FeasibleSet::unit_box(d),
        coeffs.iter().flatten().sum(),
    )
    .unwrap()
}

/// The two-good, two-type market used for the inducing experiments.
pub fn two_by_two() -> MarketInstance {
    power_market(&[vec![1.0, 0.8], vec![0.6, 1.2]], vec![0.0, 0.0])
}

/// A random square-root market with `n` types over `[0, 1]^d`.
pub fn random_power_market<R: Rng>(rng: &mut R, n: usize, d: usize) -> MarketInstance {
    let coeffs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(0.3..1.5)).collect())
        .collect();
    let costs = (0..d).map(|_| rng.gen_range(0.0..0.5)).collect();
    power_market(&coeffs, costs)
}

/// Equal-weight unit-demand buyers; `values` exclude the dummy item.
pub fn unit_demand(values: &[Vec<f64>]) -> MarketInstance {
    let items = values[0].len() + 1;
    let vals = values
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.push(0.0);
            Valuation::linear_unit_demand(v).unwrap()
        })
        .collect();
    MarketInstance::new(
        BuyerDistribution::uniform(vals).unwrap(),
        CostVector::zeros(items),
        SupplyVector::new(vec![1.0; items]).unwrap(),
        FeasibleSet::simplex(items).unwrap(),
        1.0,
    )
    .unwrap()
}

pub fn price(p: &[f64]) -> PriceVector {
    PriceVector::new(p.to_vec()).unwrap()
}

pub fn supply(s: &[f64]) -> SupplyVector {
    SupplyVector::new(s.to_vec()).unwrap()
}
