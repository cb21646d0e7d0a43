//! Unit-demand buyers and indivisible goods.
//!
//! A single price vector cannot coordinate unit-demand buyers, so the
//! seller posts random prices: a base vector minus scaled Gumbel noise. A
//! buyer picking their best item under such prices behaves, in expectation,
//! like an entropy-regularized buyer with a softmax response. That smooth
//! buyer fits the divisible-goods machinery, which then runs unchanged with
//! each oracle call replaced by one query at freshly perturbed prices.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::ground_truth::solve_regularized_scp;
use crate::market::{DemandOracle, MarketInstance, Mode, RepOracle};
use crate::owel::{owel_with_oracle, OwelConfig, OwelPlan, OwelResult};
use crate::types::{PriceVector, SupplyVector};
use crate::valuations::{regularized_response, Regularity, Valuation};
use crate::vector::{axpy, dot, norm_inf};

/// Shifts prices so the dummy good (last) costs nothing, then raises
/// everything until the cheapest real good is free if any went negative.
///
/// Every buyer's favourite item is unchanged.
pub fn convert(p: &[f64]) -> PriceVector {
    let n = p.len();
    if n == 0 {
        return PriceVector::zeros(0);
    }
    let dummy = p[n - 1];
    let rel: Vec<f64> = p[..n - 1].iter().map(|v| v - dummy).collect();
    let low = rel.iter().cloned().fold(0.0, f64::min);
    let mut out: Vec<f64> = rel.into_iter().map(|v| v - low).collect();
    out.push(0.0);
    PriceVector::new(out).expect("shifted prices are nonnegative")
}

/// A standard Gumbel draw `-ln(ln(1/G))`, `G` uniform on (0, 1).
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let g: f64 = rng.sample(Open01);
    -(1.0 / g).ln().ln()
}

/// Draws from `D(p)`: `convert(p - eta * Gumbel)`.
pub fn sample_perturbed_price<R: Rng + ?Sized>(p: &[f64], eta: f64, rng: &mut R) -> PriceVector {
    let noisy: Vec<f64> = p.iter().map(|v| v - eta * gumbel(rng)).collect();
    convert(&noisy)
}

/// The price law `D(p)` at temperature `eta`.
///
/// The law depends on `p` only up to adding a constant to every entry, so
/// the base is stored shifted to have minimum zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GumbelPriceDistribution {
    base: PriceVector,
    eta: f64,
}

impl GumbelPriceDistribution {
    pub fn new(base: &[f64], eta: f64) -> Result<Self> {
        if base.len() < 2 {
            return Err(Error::InvalidArgument("need at least one good and the dummy".into()));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {eta}")));
        }
        if base.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("base prices must be finite".into()));
        }
        let low = base.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self {
            base: PriceVector::new(base.iter().map(|v| v - low).collect())?,
            eta,
        })
    }

    pub fn base(&self) -> &PriceVector {
        &self.base
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PriceVector {
        sample_perturbed_price(&self.base, self.eta, rng)
    }
}

/// `x*(psi~)(p) = sum_i psi_i softmax((v_i - p) / eta)`, the exact expected
/// outcome of [`sim`].
pub fn regularized_expected_demand(m: &MarketInstance, p: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_unit_demand(m)?;
    check_dim(m.dim(), p.len())?;
    let mut x = vec![0.0; m.dim()];
    for t in m.distribution.types() {
        let Valuation::LinearUnitDemand { v } = &t.valuation else { unreachable!() };
        axpy(&mut x, t.weight, &regularized_response(v, p, eta)?);
    }
    Ok(x)
}

/// `SW(D(p))` in closed form: under Gumbel-perturbed prices each type picks
/// item `j` with its softmax probability, and welfare depends only on the
/// item picked.
pub fn perturbed_welfare(m: &MarketInstance, p: &[f64], eta: f64) -> Result<f64> {
    check_unit_demand(m)?;
    check_dim(m.dim(), p.len())?;
    let mut total = 0.0;
    for t in m.distribution.types() {
        let Valuation::LinearUnitDemand { v } = &t.valuation else { unreachable!() };
        let x = regularized_response(v, p, eta)?;
        total += t.weight * (dot(v, &x) - dot(&m.costs, &x));
    }
    Ok(total)
}

fn check_unit_demand(m: &MarketInstance) -> Result<()> {
    if m.mode() != Mode::UnitDemand {
        return Err(Error::InvalidArgument("needs a unit-demand market".into()));
    }
    Ok(())
}

/// One simulated regularized-buyer response: a single purchase at prices
/// drawn from `D(p)`.
pub fn sim<R: Rng + ?Sized>(m: &MarketInstance, p: &[f64], eta: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_unit_demand(m)?;
    check_dim(m.dim(), p.len())?;
    let q = sample_perturbed_price(p, eta, rng);
    let i = m.distribution.sample_index(rng);
    Ok(m.response(i, &q)?.into_vec())
}

/// Demand oracle answering every query with [`sim`], one revealed-preference
/// query each.
#[derive(Debug)]
pub struct SimOracle<'a> {
    rep: RepOracle<'a>,
    eta: f64,
}

impl<'a> SimOracle<'a> {
    pub fn new(m: &'a MarketInstance, eta: f64, seed: u64) -> Result<Self> {
        check_unit_demand(m)?;
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {eta}")));
        }
        Ok(Self {
            rep: RepOracle::new(m, seed),
            eta,
        })
    }
}

impl DemandOracle for SimOracle<'_> {
    fn dim(&self) -> usize {
        self.rep.market().dim()
    }

    fn query(&mut self, prices: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), prices.len())?;
        let mut rng = self.rep.next_stream();
        let q = sample_perturbed_price(prices, self.eta, &mut rng);
        Ok(self.rep.answer(&q, &mut rng)?.into_vec())
    }

    fn query_count(&self) -> u64 {
        self.rep.stats().query_count
    }
}

/// Noiseless stand-in for [`SimOracle`]: answers with the exact softmax
/// mixture, isolating optimization error from sampling error.
#[derive(Debug)]
pub struct SoftmaxOracle<'a> {
    market: &'a MarketInstance,
    eta: f64,
    queries: u64,
}

impl<'a> SoftmaxOracle<'a> {
    pub fn new(m: &'a MarketInstance, eta: f64) -> Result<Self> {
        check_unit_demand(m)?;
        Ok(Self { market: m, eta, queries: 0 })
    }
}

impl DemandOracle for SoftmaxOracle<'_> {
    fn dim(&self) -> usize {
        self.market.dim()
    }

    fn query(&mut self, prices: &[f64]) -> Result<Vec<f64>> {
        self.queries += 1;
        regularized_expected_demand(self.market, prices, self.eta)
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

/// `eta = alpha / (2 ln(d + 1))` for a market with `d + 1` items.
pub fn temperature(alpha: f64, items: usize) -> f64 {
    alpha / (2.0 * (items as f64).ln())
}

/// Resolved plan for the unit-demand pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwelUdPlan {
    pub alpha: f64,
    pub eta: f64,
    pub owel: OwelPlan,
}

impl OwelUdPlan {
    /// `cfg.alpha` is the end-to-end target. Half of it goes to the outer
    /// welfare run on the regularized problem, half to the regularization.
    pub fn new(m: &MarketInstance, supply: &SupplyVector, cfg: &OwelConfig) -> Result<Self> {
        check_unit_demand(m)?;
        check_dim(m.dim(), supply.len())?;
        if supply[m.dim() - 1] != 1.0 {
            return Err(Error::InvalidArgument("the dummy good's supply must be 1".into()));
        }
        if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be > 0, got {}", cfg.alpha)));
        }
        let eta = temperature(cfg.alpha, m.dim());
        let reg = Regularity::entropy_regularized(m.dim(), m.vmax, eta);
        let mut inner_cfg = cfg.clone();
        inner_cfg.alpha = cfg.alpha / 2.0;
        let owel = OwelPlan::new(&m.feasible, &m.costs, supply, reg, &inner_cfg)?;
        Ok(Self {
            alpha: cfg.alpha,
            eta,
            owel,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwelUdResult {
    pub distribution: GumbelPriceDistribution,
    pub owel: OwelResult,
}

/// Learns a price distribution whose expected demand fits `supply` and whose
/// expected welfare is within `alpha` of the optimal lottery.
pub fn owel_ud(
    m: &MarketInstance,
    supply: &SupplyVector,
    cfg: &OwelConfig,
    seed: u64,
) -> Result<(OwelUdPlan, OwelUdResult)> {
    let plan = OwelUdPlan::new(m, supply, cfg)?;
    let mut oracle = SimOracle::new(m, plan.eta, seed)?;
    let result = owel_ud_with_oracle(&mut oracle, &plan)?;
    Ok((plan, result))
}

/// [`owel_ud`] against any oracle for the regularized demand.
pub fn owel_ud_with_oracle(oracle: &mut dyn DemandOracle, plan: &OwelUdPlan) -> Result<OwelUdResult> {
    let owel = owel_with_oracle(oracle, &plan.owel)?;
    Ok(OwelUdResult {
        distribution: GumbelPriceDistribution::new(&owel.price, plan.eta)?,
        owel,
    })
}

/// Whether the regularized program at `x_hat` uses up every good exactly.
pub fn regularized_scp_saturation_check(m: &MarketInstance, x_hat: &[f64], eta: f64) -> Result<bool> {
    let sol = solve_regularized_scp(m, x_hat, eta, 1e-9)?;
    Ok(norm_inf(&sol.saturation_residuals) <= 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::BuyerDistribution;
    use crate::types::{CostVector, FeasibleSet};
    use crate::vector::{argmax, softmax};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn market(values: Vec<Vec<f64>>) -> MarketInstance {
        let d = values[0].len();
        MarketInstance::new(
            BuyerDistribution::uniform(
                values.into_iter().map(|v| Valuation::linear_unit_demand(v).unwrap()).collect(),
            )
            .unwrap(),
            CostVector::zeros(d),
            SupplyVector::new(vec![1.0; d]).unwrap(),
            FeasibleSet::simplex(d).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn convert_examples() {
        assert_eq!(convert(&[1.0, -2.0, 0.5]).as_slice(), &[3.0, 0.0, 0.0]);
        assert_eq!(convert(&[0.3, 0.7, 0.0]).as_slice(), &[0.3, 0.7, 0.0]);
        assert_eq!(convert(&[0.0, 0.0, 0.0]).as_slice(), &[0.0, 0.0, 0.0]);
        let v = [5.0, 1.0, 0.0];
        let before: Vec<f64> = v.iter().zip(&[1.0, -2.0, 0.5]).map(|(a, b)| a - b).collect();
        let after: Vec<f64> = v.iter().zip(convert(&[1.0, -2.0, 0.5]).iter()).map(|(a, b)| a - b).collect();
        assert_eq!(argmax(&before), 0);
        assert_eq!(argmax(&after), 0);
    }

    #[test]
    fn convert_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let t = rng.gen_range(-5.0..5.0);
            let q: Vec<f64> = p.iter().map(|v| v + t).collect();
            let (a, b) = (convert(&p), convert(&q));
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vanishing_noise_returns_base() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let q = sample_perturbed_price(&[0.4, 0.9, 0.0], 1e-9, &mut rng);
            assert!((q[0] - 0.4).abs() < 1e-6 && (q[1] - 0.9).abs() < 1e-6 && q[2] == 0.0);
        }
    }

    #[test]
    fn perturbed_prices_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100_000 {
            let q = sample_perturbed_price(&[0.2, 0.5, 0.1], 1.0, &mut rng);
            assert!(q.iter().all(|v| *v >= 0.0));
            assert_eq!(q[2], 0.0);
        }
    }

    #[test]
    fn sim_matches_softmax_single_type() {
        let m = market(vec![vec![1.0, 0.5, 0.0]]);
        let p = [0.5, 0.5, 0.0];
        let eta = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut mean = vec![0.0; 3];
        for _ in 0..n {
            axpy(&mut mean, 1.0 / n as f64, &sim(&m, &p, eta, &mut rng).unwrap());
        }
        let want = softmax(&[0.5, 0.0, 0.0], eta);
        for j in 0..3 {
            assert!((mean[j] - want[j]).abs() < 0.006, "{mean:?} {want:?}");
        }
    }

    #[test]
    fn sim_with_prohibitive_prices_buys_nothing() {
        let m = market(vec![vec![1.0, 0.5, 0.0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut dummy = 0;
        for _ in 0..1000 {
            dummy += sim(&m, &[100.0, 100.0, 0.0], 0.1, &mut rng).unwrap()[2] as usize;
        }
        assert_eq!(dummy, 1000);
    }

    #[test]
    fn sim_oracle_counts_queries() {
        let m = market(vec![vec![1.0, 0.5, 0.0]]);
        let mut o = SimOracle::new(&m, 0.5, 9).unwrap();
        for _ in 0..17 {
            o.query(&[0.1, 0.2, 0.0]).unwrap();
        }
        assert_eq!(o.query_count(), 17);
    }

    #[test]
    fn distribution_base_is_shifted() {
        let d = GumbelPriceDistribution::new(&[0.5, 0.7, 0.2], 0.1).unwrap();
        let b = d.base();
        assert!((b[0] - 0.3).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15 && b[2] == 0.0);
        assert!(GumbelPriceDistribution::new(&[0.5, 0.0], 0.0).is_err());
    }

    #[test]
    fn saturation_examples() {
        let sym = market(vec![vec![1.0, 0.2, 0.0], vec![0.2, 1.0, 0.0]]);
        let third = 1.0 / 3.0;
        assert!(regularized_scp_saturation_check(&sym, &[third, third, third], 0.2).unwrap());
        assert!(regularized_scp_saturation_check(&sym, &[0.0, 0.0, 1.0], 0.2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let e: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = e.iter().sum();
            let x: Vec<f64> = e.iter().map(|v| v / s).collect();
            assert!(regularized_scp_saturation_check(&sym, &x, 0.1).unwrap());
        }
    }

    #[test]
    fn temperature_formula() {
        assert!((temperature(0.2, 3) - 0.1 / 3f64.ln()).abs() < 1e-15);
    }
}
