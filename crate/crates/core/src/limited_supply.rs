//! Finite-horizon selling with non-replenishable stock.
//!
//! The seller starts with `T s_j` units of each good and serves one buyer per
//! round under a fixed pricing policy, stopping after `T` rounds or as soon
//! as some good's remaining stock goes negative.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::market::{exact, query_stream, MarketInstance};
use crate::types::{PriceVector, SupplyVector};
use crate::unit_demand::GumbelPriceDistribution;
use crate::vector::{axpy, dot};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PricingPolicy {
    FixedPrice { price: PriceVector },
    FixedDistribution { distribution: GumbelPriceDistribution },
}

impl PricingPolicy {
    pub fn dim(&self) -> usize {
        match self {
            PricingPolicy::FixedPrice { price } => price.len(),
            PricingPolicy::FixedDistribution { distribution } => distribution.base().len(),
        }
    }

    fn price<R: Rng + ?Sized>(&self, rng: &mut R) -> PriceVector {
        match self {
            PricingPolicy::FixedPrice { price } => price.clone(),
            PricingPolicy::FixedDistribution { distribution } => distribution.sample(rng),
        }
    }
}

/// One episode. Welfare increments use the drawn buyer's true valuation,
/// which only the simulator knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    /// Stopping round (1-based), at most `T`.
    pub tau: usize,
    /// Realized total welfare `Z_tau`.
    pub welfare: f64,
    /// Welfare gained in each round.
    pub increments: Vec<f64>,
    /// `consumption[t][j]`: units of good `j` sold in rounds `1..=t+1`.
    pub consumption: Vec<Vec<f64>>,
    /// Stock left after the last round (negative for the halting good).
    pub remaining: Vec<f64>,
    /// First good whose stock went negative, if any.
    pub halted_good: Option<usize>,
    /// Rounds in which some purchase exceeded one unit and was clamped.
    pub clamped_rounds: usize,
}

/// Simulates one episode of at most `horizon` rounds.
pub fn run_episode<R: Rng + ?Sized>(
    m: &MarketInstance,
    policy: &PricingPolicy,
    supply: &SupplyVector,
    horizon: usize,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let d = m.dim();
    check_dim(d, policy.dim())?;
    check_dim(d, supply.len())?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    let mut remaining: Vec<f64> = supply.iter().map(|s| s * horizon as f64).collect();
    let mut total = vec![0.0; d];
    let mut trace = EpisodeTrace {
        tau: horizon,
        welfare: 0.0,
        increments: Vec::with_capacity(horizon),
        consumption: Vec::with_capacity(horizon),
        remaining: Vec::new(),
        halted_good: None,
        clamped_rounds: 0,
    };
    for t in 1..=horizon {
        let p = policy.price(rng);
        let i = m.distribution.sample_index(rng);
        let mut x = m.response(i, &p)?.into_vec();
        if x.iter().any(|v| *v > 1.0) {
            trace.clamped_rounds += 1;
            x.iter_mut().for_each(|v| *v = v.min(1.0));
        }
        let gain = m.welfare_of(i, &x)?;
        trace.welfare += gain;
        trace.increments.push(gain);
        axpy(&mut total, 1.0, &x);
        axpy(&mut remaining, -1.0, &x);
        trace.consumption.push(total.clone());
        if let Some(j) = remaining.iter().position(|r| *r < 0.0) {
            trace.tau = t;
            trace.halted_good = Some(j);
            break;
        }
    }
    trace.remaining = remaining;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareEstimate {
    pub mean: f64,
    /// `None` for a single run.
    pub stderr: Option<f64>,
    pub mean_tau: f64,
    pub runs: usize,
}

/// Runs `runs` independent episodes; episode `k` uses stream `k` of `seed`.
pub fn episodes(
    m: &MarketInstance,
    policy: &PricingPolicy,
    supply: &SupplyVector,
    horizon: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<EpisodeTrace>> {
    (0..runs)
        .map(|k| run_episode(m, policy, supply, horizon, &mut query_stream(seed, k as u64)))
        .collect()
}

/// Monte-Carlo estimate of the expected total welfare of a fixed policy.
pub fn total_welfare_estimate(
    m: &MarketInstance,
    policy: &PricingPolicy,
    supply: &SupplyVector,
    horizon: usize,
    runs: usize,
    seed: u64,
) -> Result<WelfareEstimate> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be >= 1".into()));
    }
    Ok(summarize(&episodes(m, policy, supply, horizon, runs, seed)?))
}

fn summarize(traces: &[EpisodeTrace]) -> WelfareEstimate {
    let n = traces.len() as f64;
    let mean = traces.iter().map(|t| t.welfare).sum::<f64>() / n;
    let stderr = (traces.len() > 1).then(|| {
        let var = traces.iter().map(|t| (t.welfare - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    });
    WelfareEstimate {
        mean,
        stderr,
        mean_tau: traces.iter().map(|t| t.tau as f64).sum::<f64>() / n,
        runs: traces.len(),
    }
}

/// `c0 = sqrt(8 ln T)`, the concentration radius multiplier.
pub fn concentration_constant(horizon: usize) -> f64 {
    (8.0 * (horizon as f64).ln()).sqrt()
}

/// `(1 + 2 c0) sqrt(T ln T / s_min)`: how far the realized total welfare of
/// a supply-feasible fixed price can fall below `T SW(p)`.
///
/// Requires `T s_min > 32 ln T`, the precondition of the underlying
/// concentration argument.
pub fn deviation_bound(horizon: usize, s_min: f64) -> Result<f64> {
    let t = horizon as f64;
    if !(s_min > 0.0) || horizon < 2 || t * s_min <= 32.0 * t.ln() {
        return Err(Error::InvalidArgument(format!(
            "limited-supply deviation lemma needs T s_min > 32 ln T (T = {horizon}, s_min = {s_min})"
        )));
    }
    let c0 = concentration_constant(horizon);
    Ok((1.0 + 2.0 * c0) * (t * t.ln() / s_min).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitedSupplyReport {
    pub estimate: WelfareEstimate,
    /// `T SW(p)`.
    pub benchmark: f64,
    pub bound: f64,
    /// `mean Z - (T SW(p) - bound - 3 stderr)`; nonnegative means the check
    /// passed.
    pub margin: f64,
    pub passed: bool,
    /// Share of sampled `(episode, good, t)` triples with
    /// `|y_{j,t} - t x_j| <= c0 sqrt(t x_j)`.
    pub concentration_rate: f64,
    pub episodes: Vec<EpisodeTrace>,
}

/// Checks the fixed-price limited-supply guarantee by simulation.
pub fn verify_limited_supply_theorem(
    m: &MarketInstance,
    price: &PriceVector,
    supply: &SupplyVector,
    horizon: usize,
    runs: usize,
    seed: u64,
) -> Result<LimitedSupplyReport> {
    let demand = exact::expected_demand(m, price)?;
    if let Some(j) = (0..m.dim()).find(|&j| demand[j] > supply[j]) {
        return Err(Error::InvalidArgument(format!(
            "expected demand {} of good {j} exceeds supply {}",
            demand[j], supply[j]
        )));
    }
    let bound = deviation_bound(horizon, supply.min())?;
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be >= 1".into()));
    }
    let traces = episodes(m, &PricingPolicy::FixedPrice { price: price.clone() }, supply, horizon, runs, seed)?;
    let estimate = summarize(&traces);
    let benchmark = horizon as f64 * exact::expected_welfare_price(m, price)?;
    let margin = estimate.mean - (benchmark - bound - 3.0 * estimate.stderr.unwrap_or(0.0));

    let c0 = concentration_constant(horizon);
    let checkpoints = [horizon / 4, horizon / 2, horizon];
    let (mut held, mut total) = (0usize, 0usize);
    for tr in &traces {
        for &t in checkpoints.iter().filter(|&&t| t >= 1 && t <= tr.tau) {
            for j in 0..m.dim() {
                let expect = t as f64 * demand[j];
                total += 1;
                if (tr.consumption[t - 1][j] - expect).abs() <= c0 * expect.sqrt() {
                    held += 1;
                }
            }
        }
    }
    Ok(LimitedSupplyReport {
        estimate,
        benchmark,
        bound,
        margin,
        passed: margin >= 0.0,
        concentration_rate: if total == 0 { 1.0 } else { held as f64 / total as f64 },
        episodes: traces,
    })
}

/// Recomputes `Z_tau` from the per-round increments.
pub fn recompute_welfare(trace: &EpisodeTrace) -> f64 {
    trace.increments.iter().sum()
}

/// Welfare of a bundle for a given costed valuation, exposed for trace
/// audits.
pub fn round_welfare(m: &MarketInstance, buyer: usize, x: &[f64]) -> Result<f64> {
    Ok(m.distribution.types()[buyer].valuation.value(x)? - dot(&m.costs, x))
}
