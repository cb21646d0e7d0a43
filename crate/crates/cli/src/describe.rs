//! Resolved hyperparameters of a config, one `key: value` per line.
//!
//! Defaults that come from the analysis (shrink margin, inner accuracy,
//! outer iterations, price-ball radius, inner schedules) are printed next to
//! the values a run would actually use, so the formulas can be audited
//! without running anything.

use dynpricer::bun_to_price::{BtpBudget, BtpSchedule, PriceBall};
use dynpricer::limited_supply::{concentration_constant, deviation_bound};
use dynpricer::owel::{OwelConfig, OwelPlan, MAX_SCHEDULE_QUERIES};
use dynpricer::unit_demand::OwelUdPlan;
use dynpricer::{MarketInstance, Regularity};

use crate::config::{Algorithm, ExperimentConfig, Policy, Settings};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Description {
    pub lines: Vec<(String, String)>,
}

impl Description {
    fn put(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn vec(&mut self, key: &str, v: &[f64]) {
        let parts: Vec<String> = v.iter().map(f64::to_string).collect();
        self.put(key, format!("[{}]", parts.join(", ")));
    }

    fn budget(&mut self, key: &str, b: &BtpBudget) {
        self.put(
            key,
            format!(
                "restarts {} iterations {} validation {} step {} ({} queries)",
                b.restarts,
                b.iterations,
                b.validation,
                b.step,
                b.queries()
            ),
        );
    }

    fn schedule(&mut self, key: &str, s: &BtpSchedule) {
        self.put(
            key,
            format!(
                "restarts {} iterations {:e} validation {:e} step {:e}",
                s.restarts, s.iterations, s.validation, s.step
            ),
        );
    }

    /// Value of the first line with this key.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }
}

pub fn describe(cfg: &ExperimentConfig) -> anyhow::Result<Description> {
    let mut out = Description::default();
    let m = &cfg.market;
    out.put("algorithm", cfg.algorithm.name());
    out.put("seed", cfg.seed);
    out.put("config_hash", &cfg.hash);
    out.put("dim", m.dim());
    out.put("mode", format!("{:?}", m.mode()));
    out.put("buyer_types", m.distribution.len());
    out.put("oracle", cfg.oracle);
    out.put("output", cfg.output.display());
    regularity(&mut out, "", &m.regularity());
    out.put("saturation_warning", m.saturation_warning());

    match (&cfg.settings, cfg.algorithm) {
        (Settings::Owel(c), Algorithm::Owel) => owel(&mut out, m, c, m.regularity(), None)?,
        (Settings::Owel(c), _) => {
            let probe = probe_config(c);
            let plan = OwelUdPlan::new(m, &m.supply, &probe)?;
            out.put("alpha_total", c.alpha);
            out.put("eta", plan.eta);
            regularity(&mut out, "regularized_", &plan.owel.regularity);
            owel(&mut out, m, c, plan.owel.regularity, Some(c.alpha / 2.0))?;
        }
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
            let reg = m.regularity();
            out.vec("target", target);
            out.put("epsilon", epsilon);
            out.put("delta", delta);
            out.put("radius", PriceBall::new(m.dim(), reg, *epsilon)?.radius);
            let schedule = BtpSchedule::theory(&m.feasible, reg, *epsilon, *delta, *t1_constant)?;
            out.schedule("theory_schedule", &schedule);
            out.put("scale", scale);
            match budget {
                Some(b) => out.budget("budget", b),
                None => match schedule.scaled(*scale, MAX_SCHEDULE_QUERIES) {
                    Ok(b) => out.budget("budget", &b),
                    Err(e) => out.put("budget", format!("refused: {e}")),
                },
            }
        }
        (Settings::LimitedSupply { policy, horizon, runs }, _) => {
            match policy {
                Policy::Price(p) => out.vec("price", p),
                Policy::Distribution(d) => {
                    out.vec("distribution_base", d.base());
                    out.put("distribution_eta", d.eta());
                }
            }
            out.put("horizon", horizon);
            out.put("runs", runs);
            out.put("s_min", m.supply.min());
            out.put("c0", concentration_constant(*horizon));
            match deviation_bound(*horizon, m.supply.min()) {
                Ok(b) => out.put("deviation_bound", b),
                Err(e) => out.put("deviation_bound", format!("unavailable: {e}")),
            }
        }
        (Settings::StructuralChecks { trials }, _) => out.put("trials", trials),
    }
    Ok(out)
}

fn regularity(out: &mut Description, prefix: &str, reg: &Regularity) {
    out.put(&format!("{prefix}lambda"), reg.lambda);
    out.put(&format!("{prefix}beta"), reg.beta);
    out.put(&format!("{prefix}sigma"), reg.sigma);
}

/// A config that always yields a plan: one outer iteration and a token inner
/// budget. Only the values that do not depend on either are read from it.
fn probe_config(c: &OwelConfig) -> OwelConfig {
    let mut probe = c.clone();
    let token = BtpBudget {
        restarts: 1,
        iterations: 1,
        validation: 1,
        step: 1.0,
    };
    probe.iterations = Some(c.iterations.unwrap_or(1));
    probe.inner = Some(c.inner.unwrap_or(token));
    probe
}

fn owel(
    out: &mut Description,
    m: &MarketInstance,
    c: &OwelConfig,
    reg: Regularity,
    inner_alpha: Option<f64>,
) -> anyhow::Result<()> {
    let mut c = c.clone();
    if let Some(a) = inner_alpha {
        c.alpha = a;
    }
    let plan = |cfg: &OwelConfig| OwelPlan::new(&m.feasible, &m.costs, &m.supply, reg, cfg);
    let first = plan(&probe_config(&c))?;
    out.put("alpha", c.alpha);
    out.put("delta", c.delta);
    out.put("xi_formula", first.xi_choice.formula);
    out.put("xi_bisection", first.xi_choice.bisection);
    out.put("xi", first.xi);
    out.put("shrink_loss", first.shrink_loss);
    out.put("theory_iterations", format!("{:e}", first.theory.iterations));
    out.put("scale", c.scale);
    let iterations = match c.iterations {
        Some(t) => t,
        None => {
            let t = (first.theory.iterations * c.scale).ceil().max(1.0);
            if t > MAX_SCHEDULE_QUERIES {
                out.put("iterations", format!("refused: theory schedule needs T = {t:.3e}"));
                return Ok(());
            }
            t as usize
        }
    };
    out.put("iterations", iterations);
    let mut fixed = c.clone();
    fixed.iterations = Some(iterations);
    let second = plan(&probe_config(&fixed))?;
    out.put("epsilon", second.epsilon);
    out.put("radius", second.ball.radius);
    out.put("theory_step", format!("{:e}", second.theory.step));
    out.put("step", second.step);
    out.put("delta_inner", second.delta_inner);
    out.schedule("inner_theory_schedule", &second.theory.inner);
    match plan(&fixed) {
        Ok(p) => {
            out.budget("inner", &p.inner);
            out.budget("final_inner", &p.final_inner);
            out.put("queries", p.queries());
        }
        Err(e) => out.put("inner", format!("refused: {e}")),
    }
    Ok(())
}
