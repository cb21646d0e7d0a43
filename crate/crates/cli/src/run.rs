//! Executes one experiment.

use std::time::Instant;

use anyhow::Context;
use dynpricer::bun_to_price::{bun_to_price, BtpBudget, BtpSchedule, PriceBall};
use dynpricer::ground_truth::{opt_lottery, structural_checks, Property};
use dynpricer::limited_supply::{deviation_bound, episodes, verify_limited_supply_theorem, EpisodeTrace, PricingPolicy};
use dynpricer::market::{exact, query_stream};
use dynpricer::owel::{owel, OwelConfig, OwelResult, MAX_SCHEDULE_QUERIES};
use dynpricer::unit_demand::{owel_ud, perturbed_welfare, regularized_expected_demand};
use dynpricer::vector::dist2;
use dynpricer::{MarketInstance, PriceVector, RepOracle};
use serde_json::json;

use crate::config::{Algorithm, ExperimentConfig, Policy, Settings, SCHEMA_VERSION};
use crate::output::{Summary, TraceRow};

/// Allowed excess of expected demand over supply for the unit-demand
/// pipeline, matching its Monte-Carlo acceptance check.
pub const UD_SUPPLY_TOL: f64 = 0.02;

/// Trace rows and summary of a finished run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
    pub summary: Summary,
}

struct Outcome {
    rows: Vec<TraceRow>,
    queries: u64,
    benchmark: Option<f64>,
    achieved: Option<f64>,
    gap: Option<f64>,
    tolerance: Option<f64>,
    passed: Option<bool>,
    details: serde_json::Value,
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<RunRecord> {
    let start = Instant::now();
    let out = match (&cfg.settings, cfg.algorithm) {
        (Settings::Owel(c), Algorithm::Owel) => run_owel(cfg, c)?,
        (Settings::Owel(c), Algorithm::OwelUd) => run_owel_ud(cfg, c)?,
        (
            Settings::BunToPrice {
                target,
                epsilon,
                delta,
                scale,
                t1_constant,
                budget,
            },
            _,
        ) => {
            let budget = match budget {
                Some(b) => *b,
                None => BtpSchedule::theory(&cfg.market.feasible, cfg.market.regularity(), *epsilon, *delta, *t1_constant)?
                    .scaled(*scale, MAX_SCHEDULE_QUERIES)?,
            };
            run_buntoprice(cfg, target, *epsilon, &budget)?
        }
        (Settings::LimitedSupply { policy, horizon, runs }, _) => run_limited(cfg, policy, *horizon, *runs)?,
        (Settings::StructuralChecks { trials }, _) => run_structural(cfg, *trials)?,
        (Settings::Owel(_), _) => unreachable!("owel settings belong to owel algorithms"),
    };
    let summary = Summary {
        schema: SCHEMA_VERSION,
        algorithm: cfg.algorithm.name().into(),
        seed: cfg.seed,
        query_count: out.queries,
        benchmark: out.benchmark,
        achieved: out.achieved,
        gap: out.gap,
        tolerance: out.tolerance,
        passed: out.passed,
        runtime_seconds: start.elapsed().as_secs_f64(),
        config_hash: cfg.hash.clone(),
        details: out.details,
    };
    Ok(RunRecord {
        dim: cfg.market.dim(),
        rows: out.rows,
        summary,
    })
}

fn max_excess(demand: &[f64], supply: &[f64]) -> f64 {
    demand.iter().zip(supply).map(|(x, s)| x - s).fold(f64::NEG_INFINITY, f64::max)
}

fn owel_rows(res: &OwelResult, welfare: impl Fn(&[f64]) -> anyhow::Result<Option<f64>>) -> anyhow::Result<Vec<TraceRow>> {
    let mut rows = Vec::with_capacity(res.trace.steps.len() + 1);
    for (k, s) in res.trace.steps.iter().enumerate() {
        rows.push(TraceRow {
            iteration: k,
            bundle: s.bundle.clone(),
            price: s.price.clone(),
            queries: s.queries,
            oracle_welfare: welfare(&s.price)?,
        });
    }
    rows.push(TraceRow {
        iteration: res.trace.steps.len(),
        bundle: res.average_bundle.clone(),
        price: res.price.to_vec(),
        queries: res.queries,
        oracle_welfare: welfare(&res.price)?,
    });
    Ok(rows)
}

fn price(p: &[f64]) -> anyhow::Result<PriceVector> {
    Ok(PriceVector::new(p.to_vec())?)
}

fn run_owel(cfg: &ExperimentConfig, c: &OwelConfig) -> anyhow::Result<Outcome> {
    let m = &cfg.market;
    let (plan, res) = owel(m, &m.supply, c, cfg.seed)?;
    let oracle = cfg.oracle;
    let rows = owel_rows(&res, |p| {
        Ok(if oracle { Some(exact::expected_welfare_price(m, &price(p)?)?) } else { None })
    })?;
    let mut details = json!({
        "price": res.price.to_vec(),
        "average_bundle": res.average_bundle,
        "xi": plan.xi,
        "epsilon": plan.epsilon,
        "radius": plan.ball.radius,
        "iterations": plan.iterations,
        "step": plan.step,
        "inner": plan.inner,
        "final_inner": plan.final_inner,
        "inner_warnings": res.inner_warnings,
        "final_inner_distance": res.last.distance(),
    });
    let mut out = Outcome {
        rows,
        queries: res.queries,
        benchmark: None,
        achieved: None,
        gap: None,
        tolerance: Some(c.alpha),
        passed: None,
        details: json!(null),
    };
    if oracle {
        let benchmark = opt_lottery(m, &m.supply)?;
        let achieved = exact::expected_welfare_price(m, &res.price)?;
        let demand = exact::expected_demand(m, &res.price)?;
        let excess = max_excess(&demand, &m.supply);
        details["demand"] = json!(demand.to_vec());
        details["supply_excess"] = json!(excess);
        details["supply_tolerance"] = json!(0.0);
        out.benchmark = Some(benchmark);
        out.achieved = Some(achieved);
        out.gap = Some(benchmark - achieved);
        out.passed = Some(benchmark - achieved <= c.alpha && excess <= 0.0);
    }
    out.details = details;
    Ok(out)
}

fn run_owel_ud(cfg: &ExperimentConfig, c: &OwelConfig) -> anyhow::Result<Outcome> {
    let m = &cfg.market;
    let (plan, res) = owel_ud(m, &m.supply, c, cfg.seed)?;
    let (oracle, eta) = (cfg.oracle, plan.eta);
    let rows = owel_rows(&res.owel, |p| Ok(if oracle { Some(perturbed_welfare(m, p, eta)?) } else { None }))?;
    let base = res.distribution.base().to_vec();
    let mut details = json!({
        "distribution": { "base": base, "eta": eta },
        "average_bundle": res.owel.average_bundle,
        "xi": plan.owel.xi,
        "epsilon": plan.owel.epsilon,
        "radius": plan.owel.ball.radius,
        "iterations": plan.owel.iterations,
        "step": plan.owel.step,
        "inner": plan.owel.inner,
        "final_inner": plan.owel.final_inner,
        "inner_warnings": res.owel.inner_warnings,
        "final_inner_distance": res.owel.last.distance(),
    });
    let mut out = Outcome {
        rows,
        queries: res.owel.queries,
        benchmark: None,
        achieved: None,
        gap: None,
        tolerance: Some(c.alpha),
        passed: None,
        details: json!(null),
    };
    if oracle {
        let benchmark = opt_lottery(m, &m.supply)?;
        let achieved = perturbed_welfare(m, &base, eta)?;
        let demand = regularized_expected_demand(m, &base, eta)?;
        let excess = max_excess(&demand, &m.supply);
        details["demand"] = json!(demand);
        details["supply_excess"] = json!(excess);
        details["supply_tolerance"] = json!(UD_SUPPLY_TOL);
        out.benchmark = Some(benchmark);
        out.achieved = Some(achieved);
        out.gap = Some(benchmark - achieved);
        out.passed = Some(benchmark - achieved <= c.alpha && excess <= UD_SUPPLY_TOL);
    }
    out.details = details;
    Ok(out)
}

fn run_buntoprice(cfg: &ExperimentConfig, target: &[f64], eps: f64, budget: &BtpBudget) -> anyhow::Result<Outcome> {
    let m = &cfg.market;
    let ball = PriceBall::new(m.dim(), m.regularity(), eps)?;
    let mut oracle = RepOracle::new(m, cfg.seed);
    let res = bun_to_price(&mut oracle, &m.feasible, target, eps, &ball, budget)?;
    let per_restart = (budget.iterations + budget.validation) as u64;
    let mut rows = Vec::with_capacity(res.candidates.len());
    for (k, cand) in res.candidates.iter().enumerate() {
        let welfare = if cfg.oracle {
            Some(exact::expected_welfare_price(m, &price(&cand.price)?)?)
        } else {
            None
        };
        rows.push(TraceRow {
            iteration: k,
            bundle: cand.empirical_mean.clone(),
            price: cand.price.clone(),
            queries: per_restart * (k as u64 + 1),
            oracle_welfare: welfare,
        });
    }
    let mut details = json!({
        "target": target,
        "price": res.price.to_vec(),
        "selected": res.selected,
        "validation_distance": res.distance(),
        "warning": res.warning,
        "radius": ball.radius,
        "budget": budget,
    });
    let mut out = Outcome {
        rows,
        queries: res.queries,
        benchmark: None,
        achieved: None,
        gap: None,
        tolerance: Some(eps),
        passed: None,
        details: json!(null),
    };
    if cfg.oracle {
        let demand = exact::expected_demand(m, &res.price)?;
        let distance = dist2(&demand, target);
        details["demand"] = json!(demand.to_vec());
        out.benchmark = Some(0.0);
        out.achieved = Some(distance);
        out.gap = Some(distance);
        out.passed = Some(distance <= eps);
    }
    out.details = details;
    Ok(out)
}

fn episode_rows(traces: &[EpisodeTrace], posted: &[f64]) -> Vec<TraceRow> {
    let mut served = 0u64;
    traces
        .iter()
        .enumerate()
        .map(|(k, t)| {
            served += t.tau as u64;
            TraceRow {
                iteration: k,
                bundle: t.consumption.last().cloned().unwrap_or_else(|| vec![0.0; posted.len()]),
                price: posted.to_vec(),
                queries: served,
                oracle_welfare: Some(t.welfare),
            }
        })
        .collect()
}

fn run_limited(cfg: &ExperimentConfig, policy: &Policy, horizon: usize, runs: usize) -> anyhow::Result<Outcome> {
    let m = &cfg.market;
    let s = &m.supply;
    let (traces, benchmark, posted, concentration) = match policy {
        Policy::Price(p) => {
            if cfg.oracle {
                let report = verify_limited_supply_theorem(m, p, s, horizon, runs, cfg.seed)
                    .context("limited-supply check")?;
                (report.episodes, Some(report.benchmark), p.to_vec(), Some(report.concentration_rate))
            } else {
                let policy = PricingPolicy::FixedPrice { price: p.clone() };
                (episodes(m, &policy, s, horizon, runs, cfg.seed)?, None, p.to_vec(), None)
            }
        }
        Policy::Distribution(dist) => {
            let policy = PricingPolicy::FixedDistribution {
                distribution: dist.clone(),
            };
            let traces = episodes(m, &policy, s, horizon, runs, cfg.seed)?;
            let benchmark = if cfg.oracle {
                Some(horizon as f64 * perturbed_welfare(m, dist.base(), dist.eta())?)
            } else {
                None
            };
            (traces, benchmark, dist.base().to_vec(), None)
        }
    };
    let n = traces.len() as f64;
    let mean = traces.iter().map(|t| t.welfare).sum::<f64>() / n;
    let stderr = if traces.len() > 1 {
        let var = traces.iter().map(|t| (t.welfare - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let bound = deviation_bound(horizon, s.min()).ok();
    let tolerance = bound.map(|b| b + 3.0 * stderr);
    let gap = benchmark.map(|b| b - mean);
    let passed = match (gap, tolerance) {
        (Some(g), Some(t)) => Some(g <= t),
        (Some(_), None) => Some(false),
        _ => None,
    };
    let rows = episode_rows(&traces, &posted);
    let details = json!({
        "horizon": horizon,
        "runs": runs,
        "deviation_bound": bound,
        "stderr": stderr,
        "mean_tau": traces.iter().map(|t| t.tau as f64).sum::<f64>() / n,
        "halted_episodes": traces.iter().filter(|t| t.halted_good.is_some()).count(),
        "clamped_rounds": traces.iter().map(|t| t.clamped_rounds).sum::<usize>(),
        "concentration_rate": concentration,
    });
    Ok(Outcome {
        queries: rows.last().map_or(0, |r| r.queries),
        rows,
        benchmark,
        achieved: Some(mean),
        gap,
        tolerance,
        passed,
        details,
    })
}

fn run_structural(cfg: &ExperimentConfig, trials: usize) -> anyhow::Result<Outcome> {
    let m: &MarketInstance = &cfg.market;
    let report = structural_checks(m, trials, &mut query_stream(cfg.seed, 0))?;
    let rows = report
        .points
        .iter()
        .enumerate()
        .map(|(k, pt)| TraceRow {
            iteration: k,
            bundle: pt.bundle.clone(),
            price: pt.prices.clone(),
            queries: 0,
            oracle_welfare: Some(pt.welfare),
        })
        .collect();
    let violations = report.violations.len() as f64;
    let count = |p| report.count(p);
    let details = json!({
        "trials": report.trials,
        "concavity": count(Property::Concavity),
        "holder": count(Property::Holder),
        "supergradient": count(Property::Supergradient),
        "saturation": count(Property::Saturation),
        "saturation_flagged": report.saturation_flagged,
        "min_slack": report.min_slack,
    });
    Ok(Outcome {
        rows,
        queries: 0,
        benchmark: Some(0.0),
        achieved: Some(violations),
        gap: Some(violations),
        tolerance: Some(0.0),
        passed: Some(report.passed()),
        details,
    })
}
