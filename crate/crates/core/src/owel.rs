//! Welfare maximization over bundles.
//!
//! Welfare as a function of the induced bundle is concave, and the price
//! inducing a bundle (minus costs) is a supergradient there. So projected
//! ascent over a slightly shrunk bundle set, with [`bun_to_price`] turning
//! each iterate into prices, climbs expected welfare using only purchases.

use serde::{Deserialize, Serialize};

use crate::bun_to_price::{bun_to_price, BtpBudget, BtpResult, BtpSchedule, PriceBall, T1_CONSTANT};
use crate::error::{check_dim, Error, Result};
use crate::market::{DemandOracle, MarketInstance, Mode, RepOracle};
use crate::sgd::{maximize_perturbed, DescentConfig, Domain};
use crate::types::{shrunk_box, FeasibleSet, PriceVector, SupplyVector};
use crate::valuations::Regularity;
use crate::vector::{norm2, sub};

/// Queries per restart above which a theory schedule is refused.
pub const MAX_SCHEDULE_QUERIES: f64 = 1e8;

/// `p_hat - c`.
pub fn welfare_supergradient(price: &[f64], costs: &[f64]) -> Result<Vec<f64>> {
    check_dim(costs.len(), price.len())?;
    Ok(sub(price, costs))
}

/// `lambda (d xi)^beta + sqrt(d) xi ||c||`: welfare lost by restricting
/// bundles to the shrunk set.
pub fn shrink_loss_bound(xi: f64, lambda: f64, beta: f64, d: usize, costs: &[f64]) -> f64 {
    let d = d as f64;
    lambda * (d * xi).powf(beta) + d.sqrt() * xi * norm2(costs)
}

/// The two candidate shrink margins and the one used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiChoice {
    /// `(alpha / (4 lambda d^beta + sqrt(d) ||c||))^(1/beta)`.
    pub formula: f64,
    /// Largest `xi` whose loss bound is at most `alpha / 4`.
    pub bisection: f64,
    pub chosen: f64,
}

/// Default shrink margin. The closed form alone can overshoot `alpha / 4`
/// when costs are nonzero, so the smaller of it and the bisection root is
/// used.
pub fn default_xi(alpha: f64, lambda: f64, beta: f64, d: usize, costs: &[f64]) -> XiChoice {
    let df = d as f64;
    let formula = (alpha / (4.0 * lambda * df.powf(beta) + df.sqrt() * norm2(costs))).powf(1.0 / beta);
    let target = alpha / 4.0;
    let f = |xi: f64| shrink_loss_bound(xi, lambda, beta, d, costs);
    let mut hi = 1.0;
    while f(hi) <= target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    XiChoice {
        formula,
        bisection: lo,
        chosen: formula.min(lo),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwelConfig {
    pub alpha: f64,
    pub delta: f64,
    /// Shrink margin; defaults to [`default_xi`].
    pub xi: Option<f64>,
    /// Inner accuracy; defaults to `min(xi/2, alpha / (8 R sqrt(T)))`.
    pub epsilon: Option<f64>,
    /// Outer iterations; defaults to the theory count times `scale`.
    pub iterations: Option<usize>,
    /// Outer step; defaults to `D / (G sqrt(T))`.
    pub step: Option<f64>,
    /// Budget of each per-iterate inner call.
    pub inner: Option<BtpBudget>,
    /// Budget of the final inner call on the average bundle.
    pub final_inner: Option<BtpBudget>,
    /// Multiplier applied to theory schedules.
    pub scale: f64,
    pub t1_constant: f64,
    /// First iterate; defaults to the centre of the shrunk set.
    pub start: Option<Vec<f64>>,
}

impl OwelConfig {
    pub fn new(alpha: f64, delta: f64) -> Self {
        Self {
            alpha,
            delta,
            xi: None,
            epsilon: None,
            iterations: None,
            step: None,
            inner: None,
            final_inner: None,
            scale: 1e-3,
            t1_constant: T1_CONSTANT,
            start: None,
        }
    }

    /// Explicit outer schedule and inner budget.
    pub fn desk(mut self, iterations: usize, step: f64, inner: BtpBudget) -> Self {
        self.iterations = Some(iterations);
        self.step = Some(step);
        self.inner = Some(inner);
        self
    }
}

/// Analysed outer schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OwelTheory {
    pub iterations: f64,
    pub step: f64,
    pub inner: BtpSchedule,
}

/// Every parameter of a run, resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwelPlan {
    pub alpha: f64,
    pub delta: f64,
    pub delta_inner: f64,
    pub xi: f64,
    pub xi_choice: XiChoice,
    pub shrink_loss: f64,
    pub epsilon: f64,
    pub ball: PriceBall,
    pub iterations: usize,
    pub step: f64,
    pub inner: BtpBudget,
    pub final_inner: BtpBudget,
    pub theory: OwelTheory,
    pub regularity: Regularity,
    pub feasible: FeasibleSet,
    pub shrunk: FeasibleSet,
    pub costs: Vec<f64>,
    pub start: Vec<f64>,
}

impl OwelPlan {
    pub fn new(
        feasible: &FeasibleSet,
        costs: &[f64],
        supply: &SupplyVector,
        reg: Regularity,
        cfg: &OwelConfig,
    ) -> Result<Self> {
        let d = feasible.dim();
        check_dim(d, costs.len())?;
        check_dim(d, supply.len())?;
        if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("alpha must be > 0, got {}", cfg.alpha)));
        }
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta must be in (0, 1), got {}", cfg.delta)));
        }
        if !(cfg.scale.is_finite() && cfg.scale > 0.0) {
            return Err(Error::InvalidArgument(format!("scale must be > 0, got {}", cfg.scale)));
        }
        let lambda = reg.lambda.max(1.0);
        let xi_choice = default_xi(cfg.alpha, lambda, reg.beta, d, costs);
        let xi = cfg.xi.unwrap_or(xi_choice.chosen);
        let shrunk = shrunk_box(feasible, supply, xi)?;

        // The ball radius and the error budget depend on each other; the
        // radius at eps = xi/2 bounds G and fixes the theory schedule.
        let ball0 = PriceBall::new(d, reg, xi / 2.0)?;
        let diameter = shrunk.diameter();
        let g = ball0.radius + norm2(costs);
        let theory_t = 16.0 * diameter * diameter * g * g / (cfg.alpha * cfg.alpha);
        let iterations = match cfg.iterations {
            Some(t) => t,
            None => {
                let t = (theory_t * cfg.scale).ceil().max(1.0);
                if t > MAX_SCHEDULE_QUERIES {
                    return Err(Error::InvalidArgument(format!(
                        "theory schedule needs T = {t:.3e} outer iterations; \
                         lower the scale factor or give explicit iterations"
                    )));
                }
                t as usize
            }
        };
        if iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        let epsilon = cfg.epsilon.unwrap_or_else(|| {
            (xi / 2.0).min(cfg.alpha / (8.0 * ball0.radius * (iterations as f64).sqrt()))
        });
        if !(epsilon > 0.0 && epsilon < xi) {
            return Err(Error::InvalidArgument(format!(
                "inner accuracy eps = {epsilon} must be in (0, xi = {xi})"
            )));
        }
        let ball = PriceBall::new(d, reg, epsilon)?;
        let step = cfg
            .step
            .unwrap_or_else(|| diameter / (g * (iterations as f64).sqrt()));
        let delta_inner = cfg.delta / (iterations as f64 + 1.0);
        let inner_schedule = BtpSchedule::theory(feasible, reg, epsilon, delta_inner, cfg.t1_constant)?;
        let inner = match cfg.inner {
            Some(b) => b,
            None => inner_schedule.scaled(cfg.scale, MAX_SCHEDULE_QUERIES)?,
        };
        inner.validate()?;
        let final_inner = cfg.final_inner.unwrap_or(inner);
        final_inner.validate()?;
        let start = match &cfg.start {
            Some(s) => {
                check_dim(d, s.len())?;
                if !shrunk.contains(s) {
                    return Err(Error::InvalidArgument("start bundle is outside the shrunk set".into()));
                }
                s.clone()
            }
            None => shrunk.center(),
        };
        Ok(Self {
            alpha: cfg.alpha,
            delta: cfg.delta,
            delta_inner,
            xi,
            xi_choice,
            shrink_loss: shrink_loss_bound(xi, lambda, reg.beta, d, costs),
            epsilon,
            ball,
            iterations,
            step,
            inner,
            final_inner,
            theory: OwelTheory {
                iterations: theory_t,
                step: diameter / (g * theory_t.sqrt()),
                inner: inner_schedule,
            },
            regularity: reg,
            feasible: feasible.clone(),
            shrunk,
            costs: costs.to_vec(),
            start,
        })
    }

    /// Oracle queries a full run makes.
    pub fn queries(&self) -> u64 {
        self.iterations as u64 * self.inner.queries() + self.final_inner.queries()
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwelStep {
    pub bundle: Vec<f64>,
    pub price: Vec<f64>,
    /// Cumulative oracle queries after this iteration's inner call.
    pub queries: u64,
    pub inner_distance: f64,
    pub inner_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OwelTrace {
    pub steps: Vec<OwelStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwelResult {
    pub price: PriceVector,
    pub average_bundle: Vec<f64>,
    pub trace: OwelTrace,
    pub last: BtpResult,
    pub queries: u64,
    /// Inner calls (including the final one) that could not certify `eps`.
    pub inner_warnings: usize,
}

/// Runs the ascent against an arbitrary demand oracle.
pub fn owel_with_oracle(oracle: &mut dyn DemandOracle, plan: &OwelPlan) -> Result<OwelResult> {
    check_dim(plan.feasible.dim(), oracle.dim())?;
    let before = oracle.query_count();
    let cfg = DescentConfig::new(Domain::Set(plan.shrunk.clone()), plan.start.clone(), plan.iterations, plan.step)?
        .grad_bound(plan.ball.radius + norm2(&plan.costs))
        .perturbation_bound(plan.epsilon);
    let mut trace = OwelTrace::default();
    let mut warnings = 0;
    let average = maximize_perturbed(
        |_, x| {
            let r = bun_to_price(oracle, &plan.feasible, x, plan.epsilon, &plan.ball, &plan.inner)?;
            warnings += r.warning as usize;
            trace.steps.push(OwelStep {
                bundle: x.to_vec(),
                price: r.price.to_vec(),
                queries: oracle.query_count() - before,
                inner_distance: r.distance(),
                inner_warning: r.warning,
            });
            welfare_supergradient(&r.price, &plan.costs)
        },
        |_, _| Ok(None),
        &cfg,
    )?;
    let last = bun_to_price(oracle, &plan.feasible, &average, plan.epsilon, &plan.ball, &plan.final_inner)?;
    warnings += last.warning as usize;
    Ok(OwelResult {
        price: last.price.clone(),
        average_bundle: average,
        trace,
        last,
        queries: oracle.query_count() - before,
        inner_warnings: warnings,
    })
}

/// Runs the ascent on a divisible-goods market through its
/// revealed-preference oracle.
pub fn owel(m: &MarketInstance, supply: &SupplyVector, cfg: &OwelConfig, seed: u64) -> Result<(OwelPlan, OwelResult)> {
    if m.mode() != Mode::Divisible {
        return Err(Error::InvalidArgument(
            "owel needs a divisible-goods market; use owel_ud for unit demand".into(),
        ));
    }
    let plan = OwelPlan::new(&m.feasible, &m.costs, supply, m.regularity(), cfg)?;
    let mut oracle = RepOracle::new(m, seed);
    let result = owel_with_oracle(&mut oracle, &plan)?;
    Ok((plan, result))
}
