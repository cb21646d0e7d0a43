//! Projected subgradient descent with uniform iterate averaging.
//!
//! Two engines: one driven by unbiased stochastic gradients, one driven by
//! exact subgradients whose projected iterates are then nudged by a bounded
//! perturbation. Both return the plain average of all `T` iterates.

use crate::error::{check_dim, Error, Result};
use crate::types::{project_unchecked, FeasibleSet, MEMBERSHIP_TOL};
use crate::vector::{axpy, norm2};

/// Where the iterates live.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Set(FeasibleSet),
    /// `{p >= 0 : ||p||_2 <= radius}`.
    Ball { radius: f64, dim: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Set(s) => s.dim(),
            Domain::Ball { dim, .. } => *dim,
        }
    }

    /// Euclidean projection. For the ball this clamps to the orthant and
    /// then scales, which is exact for the orthant-ball intersection.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Domain::Set(s) => project_unchecked(s, y),
            Domain::Ball { radius, .. } => {
                let mut p: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
                let n = norm2(&p);
                if n > *radius {
                    let k = radius / n;
                    p.iter_mut().for_each(|v| *v *= k);
                }
                p
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Set(s) => s.contains(x),
            Domain::Ball { radius, dim } => {
                x.len() == *dim
                    && x.iter().all(|v| *v >= 0.0)
                    && norm2(x) <= radius * (1.0 + MEMBERSHIP_TOL) + MEMBERSHIP_TOL
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Set(s) => s.diameter(),
            // Two orthogonal points on the sphere are the farthest apart;
            // in one dimension the segment [0, r] has length r.
            Domain::Ball { radius, dim } => {
                if *dim == 1 {
                    *radius
                } else {
                    radius * std::f64::consts::SQRT_2
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub iterations: usize,
    pub step: f64,
    pub domain: Domain,
    pub start: Vec<f64>,
    /// `D`, a bound on the domain's diameter.
    pub diameter: f64,
    /// `G`: gradients longer than this abort the run.
    pub grad_bound: f64,
    /// `E`: perturbations longer than this abort the run.
    pub perturbation_bound: f64,
}

impl DescentConfig {
    /// Explicit step; bounds default to the domain diameter and no checks.
    pub fn new(domain: Domain, start: Vec<f64>, iterations: usize, step: f64) -> Result<Self> {
        let cfg = Self {
            iterations,
            step,
            diameter: domain.diameter(),
            domain,
            start,
            grad_bound: f64::INFINITY,
            perturbation_bound: f64::INFINITY,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The analysed step `eta = D / (G sqrt(T))`.
    pub fn with_theory_step(
        domain: Domain,
        start: Vec<f64>,
        iterations: usize,
        grad_bound: f64,
    ) -> Result<Self> {
        if !(grad_bound.is_finite() && grad_bound > 0.0) {
            return Err(Error::InvalidArgument(format!("G must be finite and > 0, got {grad_bound}")));
        }
        let d = domain.diameter();
        let step = d / (grad_bound * (iterations.max(1) as f64).sqrt());
        let mut cfg = Self::new(domain, start, iterations, step)?;
        cfg.grad_bound = grad_bound;
        Ok(cfg)
    }

    pub fn grad_bound(mut self, g: f64) -> Self {
        self.grad_bound = g;
        self
    }

    pub fn perturbation_bound(mut self, e: f64) -> Self {
        self.perturbation_bound = e;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be > 0, got {}", self.step)));
        }
        check_dim(self.domain.dim(), self.start.len())?;
        if !self.domain.contains(&self.start) {
            return Err(Error::InvalidArgument("start point is outside the domain".into()));
        }
        Ok(())
    }

    /// `2 D G / sqrt(T)`.
    pub fn unbiased_bound(&self) -> f64 {
        2.0 * self.diameter * self.grad_bound / (self.iterations as f64).sqrt()
    }

    /// `D G / sqrt(T) + G E sqrt(T)`.
    pub fn perturbed_bound(&self) -> f64 {
        let t = (self.iterations as f64).sqrt();
        self.diameter * self.grad_bound / t + self.grad_bound * self.perturbation_bound * t
    }
}

fn check_bound(what: &'static str, v: &[f64], bound: f64) -> Result<()> {
    let n = norm2(v);
    if !n.is_finite() || n > bound * (1.0 + 1e-12) {
        return Err(Error::BoundViolation { what, norm: n, bound });
    }
    Ok(())
}

/// Minimizes with unbiased gradient estimates: `x_{t+1} = P(x_t - eta g_t)`.
///
/// `grad` receives the (zero-based) iteration index and the current point.
/// Returns the average of `x_1..x_T`.
pub fn sgd_unbiased<F>(mut grad: F, cfg: &DescentConfig) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    sgd_perturbed(&mut grad, |_, _| Ok(None), cfg)
}

/// Minimizes with exact subgradients and perturbed projections:
/// `x_{t+1} = P(x_t - eta g_t) + xi_t`.
///
/// `perturb` sees the projected point and may return `None` for no
/// perturbation. Perturbed points must stay in the domain.
pub fn sgd_perturbed<F, P>(mut subgradient: F, mut perturb: P, cfg: &DescentConfig) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    P: FnMut(usize, &[f64]) -> Result<Option<Vec<f64>>>,
{
    cfg.validate()?;
    let d = cfg.domain.dim();
    let mut x = cfg.start.clone();
    let mut sum = vec![0.0; d];
    for t in 0..cfg.iterations {
        axpy(&mut sum, 1.0, &x);
        let g = subgradient(t, &x)?;
        check_dim(d, g.len())?;
        check_bound("gradient", &g, cfg.grad_bound)?;
        axpy(&mut x, -cfg.step, &g);
        x = cfg.domain.project(&x);
        if let Some(xi) = perturb(t, &x)? {
            check_dim(d, xi.len())?;
            check_bound("perturbation", &xi, cfg.perturbation_bound)?;
            axpy(&mut x, 1.0, &xi);
            if !cfg.domain.contains(&x) {
                return Err(Error::InvalidArgument(format!(
                    "perturbed iterate {} left the domain",
                    t + 1
                )));
            }
        }
    }
    let n = cfg.iterations as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Maximizes a concave function by minimizing its negation.
pub fn maximize_unbiased<F>(mut supergrad: F, cfg: &DescentConfig) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    sgd_unbiased(|t, x| Ok(supergrad(t, x)?.into_iter().map(|g| -g).collect()), cfg)
}

/// Perturbed ascent, the maximization form of [`sgd_perturbed`].
pub fn maximize_perturbed<F, P>(mut supergrad: F, perturb: P, cfg: &DescentConfig) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
    P: FnMut(usize, &[f64]) -> Result<Option<Vec<f64>>>,
{
    sgd_perturbed(
        |t, x| Ok(supergrad(t, x)?.into_iter().map(|g| -g).collect()),
        perturb,
        cfg,
    )
}
