//! Learning prices that induce a target expected bundle.
//!
//! Minimizes the dual `g(p) = sum_i psi_i max_x [v_i(x) - <p, x>] + <p, x_hat>`
//! over a bounded price ball. Its gradient `x_hat - x*(p)` has an unbiased
//! one-query estimate, so each restart is plain stochastic descent; the best
//! restart is picked on fresh validation queries.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::market::DemandOracle;
use crate::sgd::{sgd_unbiased, DescentConfig, Domain};
use crate::types::{FeasibleSet, PriceVector};
use crate::valuations::Regularity;
use crate::vector::{axpy, dist2, norm2, sub};

/// Constant in the descent-length schedule of the algorithm listing. The
/// amplification lemma states 4096; both are accepted.
pub const T1_CONSTANT: f64 = 16384.0;
pub const T1_CONSTANT_LEMMA: f64 = 4096.0;

/// `{p >= 0 : ||p||_2 <= radius}`, large enough to contain a price that
/// induces every target up to the requested accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBall {
    pub radius: f64,
    pub dim: usize,
}

impl PriceBall {
    /// The ball for accuracy `eps` under the given regularity constants.
    ///
    /// A Hölder constant below one is raised to one; any larger constant is
    /// still valid.
    pub fn new(dim: usize, reg: Regularity, eps: f64) -> Result<Self> {
        let radius = price_radius(dim, reg.lambda.max(1.0), reg.beta, reg.sigma, eps)?;
        Ok(Self { radius, dim })
    }

    pub fn domain(&self) -> Domain {
        Domain::Ball {
            radius: self.radius,
            dim: self.dim,
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.domain().contains(p)
    }
}

/// `sqrt(d) lambda^(1/beta) (4d / (eps^2 sigma))^((1-beta)/beta)`.
pub fn price_radius(d: usize, lambda: f64, beta: f64, sigma: f64, eps: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    if !(lambda.is_finite() && lambda >= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 1, got {lambda}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta must be in (0, 1], got {beta}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    let d = d as f64;
    let l = lambda.powf(1.0 / beta) * (4.0 * d / (eps * eps * sigma)).powf((1.0 - beta) / beta);
    Ok(d.sqrt() * l)
}

/// Query budget for one call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtpBudget {
    /// `T0`, independent descent runs.
    pub restarts: usize,
    /// `T1`, descent iterations per run (one query each).
    pub iterations: usize,
    /// `T2`, validation queries per candidate.
    pub validation: usize,
    /// Descent step.
    pub step: f64,
}

/// The analysed schedule, before any scaling. Values can be far beyond
/// what fits a run, so they stay real-valued.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtpSchedule {
    pub restarts: usize,
    pub iterations: f64,
    pub validation: f64,
    pub step: f64,
    pub radius: f64,
}

/// `ceil(log2(2 / delta))` restarts.
pub fn restarts_for(delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {delta}")));
    }
    Ok((2.0 / delta).log2().ceil() as usize)
}

impl BtpSchedule {
    /// Schedule for targets in `set`, accuracy `eps`, confidence `delta`.
    pub fn theory(
        set: &FeasibleSet,
        reg: Regularity,
        eps: f64,
        delta: f64,
        t1_constant: f64,
    ) -> Result<Self> {
        let d = set.dim();
        let ball = PriceBall::new(d, reg, eps)?;
        let restarts = restarts_for(delta)?;
        let r = set.norm_bound();
        let df = d as f64;
        let l = ball.radius / df.sqrt();
        let iterations = t1_constant * df * l * l * r * r / (eps.powi(4) * reg.sigma * reg.sigma);
        let validation = 4.0 * r * r * (16.0 * df * r * r / delta).ln().max(1.0) / (eps * eps);
        // Gradients x_hat - x*(p) are differences of two points of the set.
        let g = set.diameter();
        let step = ball.domain().diameter() / (g * iterations.sqrt());
        Ok(Self {
            restarts,
            iterations,
            validation,
            step,
            radius: ball.radius,
        })
    }

    /// Scales both query counts by `scale` and rounds up; the step is
    /// recomputed for the shorter run.
    pub fn scaled(&self, scale: f64, max_queries: f64) -> Result<BtpBudget> {
        let t1 = (self.iterations * scale).ceil().max(1.0);
        let t2 = (self.validation * scale).ceil().max(1.0);
        if t1 > max_queries || t2 > max_queries {
            return Err(Error::InvalidArgument(format!(
                "theory schedule needs T1 = {t1:.3e}, T2 = {t2:.3e} queries per restart; \
                 lower the scale factor or give an explicit budget"
            )));
        }
        Ok(BtpBudget {
            restarts: self.restarts,
            iterations: t1 as usize,
            validation: t2 as usize,
            step: self.step * (self.iterations / t1).sqrt(),
        })
    }
}

impl BtpBudget {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iterations == 0 || self.validation == 0 {
            return Err(Error::InvalidArgument(
                "restarts, iterations and validation must all be >= 1".into(),
            ));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be > 0, got {}", self.step)));
        }
        Ok(())
    }

    /// Exact number of oracle queries one call makes.
    pub fn queries(&self) -> u64 {
        (self.restarts * (self.iterations + self.validation)) as u64
    }
}

/// `x_hat - purchased`, the one-query estimate of the dual gradient.
pub fn dual_gradient_estimate(target: &[f64], purchased: &[f64]) -> Result<Vec<f64>> {
    check_dim(target.len(), purchased.len())?;
    Ok(sub(target, purchased))
}

/// One restart's output and how it fared in validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub price: Vec<f64>,
    pub empirical_mean: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtpResult {
    pub price: PriceVector,
    pub selected: usize,
    pub candidates: Vec<Candidate>,
    pub queries: u64,
    /// The best validated distance exceeded `eps`: the budget was too small
    /// to certify the requested accuracy.
    pub warning: bool,
}

impl BtpResult {
    pub fn distance(&self) -> f64 {
        self.candidates[self.selected].distance
    }
}

/// Learns `p_hat` with `||x*(p_hat) - x_hat||_2 <= eps` with probability at
/// least `1 - delta` when the budget follows the schedule.
///
/// Every query goes through `oracle`. The target must lie in `set` with
/// every coordinate strictly positive.
pub fn bun_to_price(
    oracle: &mut dyn DemandOracle,
    set: &FeasibleSet,
    target: &[f64],
    eps: f64,
    ball: &PriceBall,
    budget: &BtpBudget,
) -> Result<BtpResult> {
    let d = set.dim();
    check_dim(d, target.len())?;
    check_dim(d, oracle.dim())?;
    check_dim(d, ball.dim)?;
    budget.validate()?;
    if let Some((coordinate, &value)) = target.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotInducible { coordinate, value });
    }
    if !set.contains(target) {
        return Err(Error::InvalidArgument("target bundle is outside the feasible set".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }

    let domain = ball.domain();
    let start = domain.project(&vec![1.0; d]);
    let grad_bound = set.diameter();
    let cfg = DescentConfig::new(domain, start, budget.iterations, budget.step)?.grad_bound(grad_bound);
    let before = oracle.query_count();

    let mut candidates = Vec::with_capacity(budget.restarts);
    for _ in 0..budget.restarts {
        let price = sgd_unbiased(
            |_, p| {
                let x = oracle.query(p)?;
                dual_gradient_estimate(target, &x)
            },
            &cfg,
        )?;
        let mut mean = vec![0.0; d];
        for _ in 0..budget.validation {
            let x = oracle.query(&price)?;
            axpy(&mut mean, 1.0, &x);
        }
        mean.iter_mut().for_each(|m| *m /= budget.validation as f64);
        let distance = dist2(&mean, target);
        candidates.push(Candidate {
            price,
            empirical_mean: mean,
            distance,
        });
    }

    let selected = candidates
        .iter()
        .enumerate()
        .fold(0, |best, (i, c)| if c.distance < candidates[best].distance { i } else { best });
    let warning = candidates[selected].distance > eps;
    let price = PriceVector::new(candidates[selected].price.clone())?;
    debug_assert!(norm2(&price) <= ball.radius * (1.0 + 1e-9));
    Ok(BtpResult {
        price,
        selected,
        candidates,
        queries: oracle.query_count() - before,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{BuyerDistribution, MarketInstance, RepOracle};
    use crate::types::{CostVector, SupplyVector};
    use crate::valuations::Valuation;

    fn example_one() -> MarketInstance {
        MarketInstance::new(
            BuyerDistribution::single(Valuation::separable_power(vec![1.0], 0.5).unwrap()).unwrap(),
            CostVector::new(vec![1.0]).unwrap(),
            SupplyVector::new(vec![1.0]).unwrap(),
            FeasibleSet::unit_box(1),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn radius_examples() {
        assert_eq!(price_radius(1, 2.0, 1.0, 0.3, 0.1).unwrap(), 2.0);
        assert!((price_radius(1, 1.0, 0.5, 1.0, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((price_radius(4, 1.0, 0.5, 1.0, 1.0).unwrap() - 32.0).abs() < 1e-12);
        assert!(price_radius(1, 0.5, 0.5, 1.0, 1.0).is_err());
        assert!(price_radius(1, 1.0, 1.5, 1.0, 1.0).is_err());
        assert!(price_radius(1, 1.0, 0.5, 0.0, 1.0).is_err());
        assert!(price_radius(1, 1.0, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn gradient_estimate_examples() {
        assert_eq!(dual_gradient_estimate(&[0.25], &[0.25]).unwrap(), vec![0.0]);
        assert_eq!(dual_gradient_estimate(&[0.5, 0.25], &[0.25, 0.5]).unwrap(), vec![0.25, -0.25]);
        assert!(dual_gradient_estimate(&[0.3], &[0.1, 0.3]).is_err());
    }

    #[test]
    fn restart_count() {
        assert_eq!(restarts_for(0.1).unwrap(), 5);
        assert_eq!(restarts_for(0.5).unwrap(), 2);
        assert!(restarts_for(0.0).is_err());
    }

    #[test]
    fn zero_coordinate_is_not_inducible() {
        let m = MarketInstance::new(
            BuyerDistribution::single(Valuation::separable_power(vec![1.0, 1.0], 0.5).unwrap()).unwrap(),
            CostVector::new(vec![0.0, 0.0]).unwrap(),
            SupplyVector::new(vec![1.0, 1.0]).unwrap(),
            FeasibleSet::unit_box(2),
            1.0,
        )
        .unwrap();
        let mut oracle = RepOracle::new(&m, 0);
        let ball = PriceBall { radius: 10.0, dim: 2 };
        let budget = BtpBudget { restarts: 1, iterations: 10, validation: 10, step: 0.1 };
        let err = bun_to_price(&mut oracle, &m.feasible, &[0.0, 0.5], 0.05, &ball, &budget).unwrap_err();
        assert_eq!(err, Error::NotInducible { coordinate: 0, value: 0.0 });
        assert_eq!(oracle.query_count(), 0);
    }

    #[test]
    fn example_one_induces_quarter() {
        let m = example_one();
        let reg = m.regularity();
        let ball = PriceBall::new(1, reg, 0.05).unwrap();
        let budget = BtpBudget { restarts: 5, iterations: 2000, validation: 200, step: 0.5 };
        let mut oracle = RepOracle::new(&m, 11);
        let r = bun_to_price(&mut oracle, &m.feasible, &[0.25], 0.05, &ball, &budget).unwrap();
        assert!((r.price[0] - 1.0).abs() < 0.2, "{:?}", r.price);
        assert_eq!(r.queries, budget.queries());
        assert!(!r.warning);
        for c in &r.candidates {
            assert!(ball.contains(&c.price));
            assert!(c.distance >= r.distance());
        }
    }

    #[test]
    fn scaled_schedule_rejects_huge_budgets() {
        let m = example_one();
        let s = BtpSchedule::theory(&m.feasible, m.regularity(), 0.05, 0.1, T1_CONSTANT).unwrap();
        assert!(s.iterations > 1e12);
        assert!(s.scaled(1e-3, 1e7).is_err());
        let b = s.scaled(1e-12, 1e7).unwrap();
        assert!(b.iterations >= 1 && b.step > 0.0);
    }
}
