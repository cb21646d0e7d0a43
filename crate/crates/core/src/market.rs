//! Buyer populations, the revealed-preference oracle, and exact evaluation
//! oracles.
//!
//! Learning code only ever talks to a [`DemandOracle`]: post prices, observe
//! a purchased bundle. Expected demand and welfare are available through
//! [`exact`], which exists for evaluation and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::types::{Bundle, CostVector, FeasibleSet, PriceVector, SupplyVector};
use crate::valuations::{unit_demand_choice, Regularity, Valuation};

/// Divisible goods with strongly concave buyers, or unit-demand buyers over
/// indivisible goods plus a dummy "buy nothing" good.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Divisible,
    UnitDemand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerType {
    pub valuation: Valuation,
    pub weight: f64,
}

/// A finite distribution over buyer types.
#[derive(Debug, Clone, PartialEq)]
pub struct BuyerDistribution {
    types: Vec<BuyerType>,
    cumulative: Vec<f64>,
}

impl BuyerDistribution {
    pub fn new(types: Vec<BuyerType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::InvalidArgument("at least one buyer type is required".into()));
        }
        let dim = types[0].valuation.dim();
        let unit = types[0].valuation.is_unit_demand();
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(types.len());
        for (i, t) in types.iter().enumerate() {
            t.valuation.validate()?;
            if !(t.weight.is_finite() && t.weight > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "buyer type {i} weight must be > 0, got {}",
                    t.weight
                )));
            }
            if t.valuation.dim() != dim || t.valuation.is_unit_demand() != unit {
                return Err(Error::InvalidArgument(format!(
                    "buyer type {i} differs in dimension or mode from type 0"
                )));
            }
            total += t.weight;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "buyer type weights must sum to 1, got {total}"
            )));
        }
        Ok(Self { types, cumulative })
    }

    /// A single buyer type with weight one.
    pub fn single(valuation: Valuation) -> Result<Self> {
        Self::new(vec![BuyerType {
            valuation,
            weight: 1.0,
        }])
    }

    /// Equal-weight mixture.
    pub fn uniform(valuations: Vec<Valuation>) -> Result<Self> {
        let n = valuations.len() as f64;
        let types = valuations
            .into_iter()
            .map(|valuation| BuyerType {
                valuation,
                weight: 1.0 / n,
            })
            .collect::<Vec<_>>();
        // 1/n summed n times is not always exactly 1.
        let mut dist = Self::new(types.clone()).or_else(|_| {
            let mut t = types;
            let rest: f64 = t[1..].iter().map(|b| b.weight).sum();
            t[0].weight = 1.0 - rest;
            Self::new(t)
        })?;
        if let Some(last) = dist.cumulative.last_mut() {
            *last = 1.0;
        }
        Ok(dist)
    }

    pub fn types(&self) -> &[BuyerType] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.types[0].valuation.dim()
    }

    /// Draws a type index with probability equal to its weight.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.types.len() - 1)
    }
}

/// Everything the simulator knows about a market. The learner sees none of
/// it except the dimension, costs, supply and feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketInstance {
    pub distribution: BuyerDistribution,
    pub costs: CostVector,
    pub supply: SupplyVector,
    pub feasible: FeasibleSet,
    pub vmax: f64,
    mode: Mode,
    saturation_warning: bool,
}

impl MarketInstance {
    pub fn new(
        distribution: BuyerDistribution,
        costs: CostVector,
        supply: SupplyVector,
        feasible: FeasibleSet,
        vmax: f64,
    ) -> Result<Self> {
        let d = distribution.dim();
        check_dim(d, costs.len())?;
        check_dim(d, supply.len())?;
        check_dim(d, feasible.dim())?;
        let unit = distribution.types()[0].valuation.is_unit_demand();
        let mode = if unit { Mode::UnitDemand } else { Mode::Divisible };
        if unit {
            if !matches!(feasible, FeasibleSet::Simplex { .. }) {
                return Err(Error::InvalidArgument(
                    "unit-demand markets use the simplex over d+1 items".into(),
                ));
            }
            if costs[d - 1] != 0.0 {
                return Err(Error::InvalidArgument("the dummy good's cost must be 0".into()));
            }
            if supply[d - 1] != 1.0 {
                return Err(Error::InvalidArgument("the dummy good's supply must be 1".into()));
            }
            if !(vmax.is_finite() && vmax > 0.0) {
                return Err(Error::InvalidArgument(format!("vmax must be > 0, got {vmax}")));
            }
            for (i, t) in distribution.types().iter().enumerate() {
                if t.valuation.max_item_value() > vmax {
                    return Err(Error::InvalidArgument(format!(
                        "buyer type {i} has an item value above vmax = {vmax}"
                    )));
                }
            }
        }
        let saturation_warning = distribution
            .types()
            .iter()
            .any(|t| t.valuation.may_satiate(&feasible));
        Ok(Self {
            distribution,
            costs,
            supply,
            feasible,
            vmax,
            mode,
            saturation_warning,
        })
    }

    pub fn dim(&self) -> usize {
        self.distribution.dim()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// True when some buyer type can be satiated inside the feasible set,
    /// so supply saturation (and with it inducibility) may fail.
    pub fn saturation_warning(&self) -> bool {
        self.saturation_warning
    }

    /// Class constants valid for every buyer type.
    pub fn regularity(&self) -> Regularity {
        Regularity::combine(
            self.distribution
                .types()
                .iter()
                .map(|t| t.valuation.regularity(&self.feasible)),
        )
        .expect("distribution is nonempty")
    }

    /// The bundle bought by buyer type `i` at prices `p`.
    pub fn response(&self, i: usize, p: &PriceVector) -> Result<Bundle> {
        let v = &self.distribution.types()[i].valuation;
        match (self.mode, v) {
            (Mode::UnitDemand, Valuation::LinearUnitDemand { v }) => {
                let mut x = vec![0.0; v.len()];
                x[unit_demand_choice(v, p)] = 1.0;
                Bundle::new(x)
            }
            _ => v.buyer_response(p, &self.feasible),
        }
    }

    /// Welfare `v_i(x) - <c, x>` of buyer type `i` consuming `x`.
    pub fn welfare_of(&self, i: usize, x: &[f64]) -> Result<f64> {
        let v = &self.distribution.types()[i].valuation;
        Ok(v.value(x)? - crate::vector::dot(&self.costs, x))
    }
}

/// Query accounting for a revealed-preference oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleStats {
    pub query_count: u64,
    pub seed: u64,
}

/// Anything that answers "post these prices, what was bought?" with an
/// unbiased, bounded estimate of expected demand.
pub trait DemandOracle {
    fn dim(&self) -> usize;
    fn query(&mut self, prices: &[f64]) -> Result<Vec<f64>>;
    fn query_count(&self) -> u64;
}

/// The stream used for query number `index` under `seed`.
///
/// Streams are keyed by query index, so any schedule that assigns the same
/// indices reproduces the same draws.
pub fn query_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// The simulated revealed-preference oracle: each query draws a buyer from
/// the distribution and returns what they bought.
#[derive(Debug)]
pub struct RepOracle<'a> {
    market: &'a MarketInstance,
    base: ChaCha8Rng,
    stats: OracleStats,
}

impl<'a> RepOracle<'a> {
    pub fn new(market: &'a MarketInstance, seed: u64) -> Self {
        Self {
            market,
            base: ChaCha8Rng::seed_from_u64(seed),
            stats: OracleStats {
                query_count: 0,
                seed,
            },
        }
    }

    pub fn market(&self) -> &'a MarketInstance {
        self.market
    }

    pub fn stats(&self) -> OracleStats {
        self.stats
    }

    /// Reserves the next query index and returns its random stream.
    pub(crate) fn next_stream(&mut self) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(self.stats.query_count);
        self.stats.query_count += 1;
        rng
    }

    /// One oracle call, with the draw taken from `rng`.
    pub(crate) fn answer<R: Rng + ?Sized>(&self, p: &PriceVector, rng: &mut R) -> Result<Bundle> {
        let i = self.market.distribution.sample_index(rng);
        self.market.response(i, p)
    }

    /// `ReP(p)`: sample a buyer, return the purchased bundle.
    pub fn rep_query(&mut self, p: &PriceVector) -> Result<Bundle> {
        check_dim(self.market.dim(), p.len())?;
        let mut rng = self.next_stream();
        self.answer(p, &mut rng)
    }
}

impl DemandOracle for RepOracle<'_> {
    fn dim(&self) -> usize {
        self.market.dim()
    }

    fn query(&mut self, prices: &[f64]) -> Result<Vec<f64>> {
        let p = PriceVector::new(prices.to_vec())?;
        Ok(self.rep_query(&p)?.into_vec())
    }

    fn query_count(&self) -> u64 {
        self.stats.query_count
    }
}

/// Noiseless oracle answering with the exact expected demand. Useful for
/// isolating optimization error from sampling error.
#[derive(Debug)]
pub struct ExpectedDemandOracle<'a> {
    market: &'a MarketInstance,
    queries: u64,
}

impl<'a> ExpectedDemandOracle<'a> {
    pub fn new(market: &'a MarketInstance) -> Self {
        Self { market, queries: 0 }
    }
}

impl DemandOracle for ExpectedDemandOracle<'_> {
    fn dim(&self) -> usize {
        self.market.dim()
    }

    fn query(&mut self, prices: &[f64]) -> Result<Vec<f64>> {
        self.queries += 1;
        let p = PriceVector::new(prices.to_vec())?;
        Ok(exact::expected_demand(self.market, &p)?.into_vec())
    }

    fn query_count(&self) -> u64 {
        self.queries
    }
}

/// Exact evaluation oracles.
///
/// These read buyer valuations directly, which a seller cannot do. They are
/// for measuring the algorithms, never for driving them.
pub mod exact {
    use super::*;
    use crate::unit_demand::GumbelPriceDistribution;

    /// `E_{v ~ psi}[x*_v(p)]`.
    pub fn expected_demand(m: &MarketInstance, p: &PriceVector) -> Result<Bundle> {
        check_dim(m.dim(), p.len())?;
        let mut total = vec![0.0; m.dim()];
        for (i, t) in m.distribution.types().iter().enumerate() {
            let x = m.response(i, p)?;
            crate::vector::axpy(&mut total, t.weight, &x);
        }
        Bundle::new(total)
    }

    /// `SW(p) = E_{v ~ psi}[v(x*_v(p)) - <c, x*_v(p)>]`.
    pub fn expected_welfare_price(m: &MarketInstance, p: &PriceVector) -> Result<f64> {
        check_dim(m.dim(), p.len())?;
        let mut total = 0.0;
        for (i, t) in m.distribution.types().iter().enumerate() {
            let x = m.response(i, p)?;
            total += t.weight * m.welfare_of(i, &x)?;
        }
        Ok(total)
    }

    /// Monte-Carlo estimate of demand and welfare under a random price law.
    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct DistributionEstimate {
        pub demand: Vec<f64>,
        pub demand_stderr: Vec<f64>,
        pub welfare: f64,
        pub welfare_stderr: f64,
        pub samples: usize,
    }

    /// Estimates `x(D) = E_{p ~ D}[x(p)]` and `SW(D) = E_{p ~ D}[SW(p)]`,
    /// averaging the exact per-price oracles over sampled prices.
    pub fn distribution_demand_welfare<R: Rng + ?Sized>(
        m: &MarketInstance,
        dist: &GumbelPriceDistribution,
        samples: usize,
        rng: &mut R,
    ) -> Result<DistributionEstimate> {
        if samples == 0 {
            return Err(Error::InvalidArgument("samples must be >= 1".into()));
        }
        check_dim(m.dim(), dist.base().len())?;
        let d = m.dim();
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        let (mut w_sum, mut w_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let p = dist.sample(rng);
            let mut w = 0.0;
            let mut x = vec![0.0; d];
            for (i, t) in m.distribution.types().iter().enumerate() {
                let xi = m.response(i, &p)?;
                w += t.weight * m.welfare_of(i, &xi)?;
                crate::vector::axpy(&mut x, t.weight, &xi);
            }
            for j in 0..d {
                sum[j] += x[j];
                sum_sq[j] += x[j] * x[j];
            }
            w_sum += w;
            w_sq += w * w;
        }
        let n = samples as f64;
        let stderr = |s: f64, s2: f64| -> f64 {
            if samples < 2 {
                f64::NAN
            } else {
                let mean = s / n;
                ((s2 / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
        };
        Ok(DistributionEstimate {
            demand: sum.iter().map(|s| s / n).collect(),
            demand_stderr: sum.iter().zip(&sum_sq).map(|(s, s2)| stderr(*s, *s2)).collect(),
            welfare: w_sum / n,
            welfare_stderr: stderr(w_sum, w_sq),
            samples,
        })
    }
}
