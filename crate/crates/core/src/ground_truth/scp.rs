//! Exact solutions of the per-bundle welfare program
//!
//! ```text
//! VAL(x_hat) = max sum_i psi_i v_i(x_i)  s.t.  x_i in F,  sum_i psi_i x_i <= x_hat
//! ```
//!
//! through its partial Lagrangian dual
//! `g(p) = sum_i psi_i max_{x in F} [v_i(x) - <p, x>] + <p, x_hat>` over
//! `p >= 0`, whose inner maximizers are the buyers' own responses.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::market::{MarketInstance, Mode};
use crate::types::{Bundle, PriceVector};
use crate::valuations::Valuation;
use crate::vector::{axpy, dot, norm_inf, softmax};

/// Sweep cap of the dual coordinate solver.
pub const MAX_SWEEPS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpSolution {
    /// One bundle per buyer type.
    pub allocations: Vec<Bundle>,
    /// `VAL(x_hat)`.
    pub value: f64,
    pub dual_prices: PriceVector,
    /// `x_hat - sum_i psi_i x_i`.
    pub saturation_residuals: Vec<f64>,
}

/// Result of minimizing `g(p)` over `p >= lower`.
#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub prices: Vec<f64>,
    pub allocations: Vec<Bundle>,
    pub demand: Vec<f64>,
}

fn responses(m: &MarketInstance, p: &[f64]) -> Result<(Vec<Bundle>, Vec<f64>)> {
    let price = PriceVector::new(p.to_vec())?;
    let mut demand = vec![0.0; m.dim()];
    let mut alloc = Vec::with_capacity(m.distribution.len());
    for (i, t) in m.distribution.types().iter().enumerate() {
        let x = m.response(i, &price)?;
        axpy(&mut demand, t.weight, &x);
        alloc.push(x);
    }
    Ok((alloc, demand))
}

/// Minimizes `g(p) = sum_i psi_i max_x [v_i(x) - <p, x>] + <p, target>` over
/// `p >= lower` by cyclic exact coordinate minimization. Each coordinate
/// step solves `target_j = demand_j(p)` by bisection, which is exact for
/// separable valuations after one sweep.
pub(crate) fn minimize_dual(
    m: &MarketInstance,
    target: &[f64],
    lower: &[f64],
    tol: f64,
) -> Result<DualSolution> {
    let d = m.dim();
    check_dim(d, target.len())?;
    check_dim(d, lower.len())?;
    let mut p = lower.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        for j in 0..d {
            let grad_j = |t: f64, p: &mut Vec<f64>| -> Result<f64> {
                p[j] = t;
                Ok(target[j] - responses(m, p)?.1[j])
            };
            if grad_j(lower[j], &mut p)? >= 0.0 {
                p[j] = lower[j];
                continue;
            }
            let mut lo = lower[j];
            let mut hi = lower[j].max(1.0);
            while grad_j(hi, &mut p)? < 0.0 {
                lo = hi;
                hi *= 2.0;
                if hi > 1e12 {
                    return Err(Error::SolverFailure {
                        iterations: 0,
                        residual: f64::INFINITY,
                    });
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if grad_j(mid, &mut p)? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            p[j] = 0.5 * (lo + hi);
        }
        let (_, demand) = responses(m, &p)?;
        // Projected-gradient residual: complementary slackness at the bound,
        // stationarity elsewhere.
        residual = (0..d)
            .map(|j| {
                let g = target[j] - demand[j];
                if p[j] <= lower[j] {
                    (-g).max(0.0)
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max);
        if residual <= tol {
            let (allocations, demand) = responses(m, &p)?;
            return Ok(DualSolution {
                prices: p,
                allocations,
                demand,
            });
        }
    }
    Err(Error::SolverFailure {
        iterations: MAX_SWEEPS,
        residual,
    })
}

fn check_target(m: &MarketInstance, x_hat: &[f64]) -> Result<()> {
    check_dim(m.dim(), x_hat.len())?;
    if let Some((coordinate, &value)) = x_hat.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotInducible { coordinate, value });
    }
    if !m.feasible.contains(x_hat) {
        return Err(Error::InvalidArgument("bundle is outside the feasible set".into()));
    }
    Ok(())
}

/// Solves the welfare program at `x_hat` to dual residual `tol`.
pub fn solve_scp(m: &MarketInstance, x_hat: &[f64], tol: f64) -> Result<ScpSolution> {
    if m.mode() != Mode::Divisible {
        return Err(Error::InvalidArgument(
            "solve_scp covers divisible goods; use solve_regularized_scp for unit demand".into(),
        ));
    }
    check_target(m, x_hat)?;
    let sol = minimize_dual(m, x_hat, &vec![0.0; m.dim()], tol)?;
    let value = m
        .distribution
        .types()
        .iter()
        .zip(&sol.allocations)
        .map(|(t, x)| t.weight * t.valuation.value(x).expect("responses are nonnegative"))
        .sum();
    Ok(ScpSolution {
        saturation_residuals: x_hat.iter().zip(&sol.demand).map(|(a, b)| a - b).collect(),
        allocations: sol.allocations,
        value,
        dual_prices: PriceVector::new(sol.prices)?,
    })
}

/// Default dual tolerance of the convenience wrappers.
pub const SCP_TOL: f64 = 1e-10;

/// `SW(x_hat) = VAL(x_hat) - <c, x_hat>`.
pub fn sw_of_bundle(m: &MarketInstance, x_hat: &[f64]) -> Result<f64> {
    let sol = solve_scp(m, x_hat, SCP_TOL)?;
    Ok(sol.value - dot(&m.costs, x_hat))
}

/// True when the solution meets every supply constraint with equality.
pub fn check_saturation(sol: &ScpSolution, x_hat: &[f64]) -> bool {
    x_hat.len() == sol.saturation_residuals.len() && norm_inf(&sol.saturation_residuals) <= 1e-5
}

/// Primal grid search for one or two buyer types on a box, used to
/// cross-check the dual method. With two types the first type's bundle is
/// gridded and the second receives whatever the constraint leaves, capped
/// by the box; this is optimal for valuations nondecreasing in each good.
pub fn grid_val(m: &MarketInstance, x_hat: &[f64], resolution: f64) -> Result<f64> {
    check_target(m, x_hat)?;
    let types = m.distribution.types();
    let (lower, upper) = m.feasible.bounds();
    if m.dim() > 2 || types.len() > 2 || m.feasible.is_simplex_like() {
        return Err(Error::InvalidArgument(
            "grid search covers boxes with d <= 2 and at most two types".into(),
        ));
    }
    if types.len() == 1 {
        return types[0].valuation.value(x_hat);
    }
    let (w1, w2) = (types[0].weight, types[1].weight);
    let eval = |x1: &[f64]| -> Option<f64> {
        let mut x2 = Vec::with_capacity(x1.len());
        for j in 0..x1.len() {
            let r = (x_hat[j] - w1 * x1[j]) / w2;
            if r < lower[j] - 1e-15 {
                return None;
            }
            x2.push(r.min(upper[j]).max(lower[j]));
        }
        let v = w1 * types[0].valuation.value_unchecked(x1) + w2 * types[1].valuation.value_unchecked(&x2);
        Some(v)
    };
    // Each good's share for type 1 ranges over [l, min(u, x_hat / w1)].
    let hi: Vec<f64> = (0..m.dim()).map(|j| upper[j].min(x_hat[j] / w1)).collect();
    let search = |lo: &[f64], hi: &[f64], steps: usize| -> (f64, Vec<f64>) {
        let mut best = (f64::NEG_INFINITY, lo.to_vec());
        let mut idx = vec![0usize; lo.len()];
        loop {
            let x1: Vec<f64> = (0..lo.len())
                .map(|j| lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / steps as f64)
                .collect();
            if let Some(v) = eval(&x1) {
                if v > best.0 {
                    best = (v, x1);
                }
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return best;
                }
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    };
    let steps = (1.0 / resolution).ceil() as usize;
    let (mut best, mut at) = search(&lower, &hi, steps);
    // Zoom in around the incumbent.
    let mut width: Vec<f64> = (0..m.dim()).map(|j| (hi[j] - lower[j]) / steps as f64).collect();
    for _ in 0..3 {
        let lo2: Vec<f64> = (0..m.dim()).map(|j| (at[j] - width[j]).max(lower[j])).collect();
        let hi2: Vec<f64> = (0..m.dim()).map(|j| (at[j] + width[j]).min(hi[j])).collect();
        let (v, x) = search(&lo2, &hi2, 100);
        if v > best {
            best = v;
            at = x;
        }
        width.iter_mut().for_each(|w| *w /= 50.0);
    }
    Ok(best)
}

/// Solution of the entropy-regularized program over the simplex
/// `max sum_i psi_i [<v_i, x_i> + eta H(x_i)]` s.t. `sum_i psi_i x_i <= x_hat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedScpSolution {
    pub allocations: Vec<Vec<f64>>,
    pub value: f64,
    /// Normalized so the smallest price on the support of `x_hat` is 0.
    /// Goods outside the support have no finite dual price.
    pub dual_prices: Vec<Option<f64>>,
    pub saturation_residuals: Vec<f64>,
}

/// Regularized program for unit-demand markets.
///
/// Goods with `x_hat_j = 0` are forced out of every allocation. On the
/// remaining support the dual optimum satisfies a matrix-scaling equation
/// (softmax rows with prescribed column sums), solved by Sinkhorn updates
/// `p_j += eta ln(demand_j / x_hat_j)`.
pub fn solve_regularized_scp(
    m: &MarketInstance,
    x_hat: &[f64],
    eta: f64,
    tol: f64,
) -> Result<RegularizedScpSolution> {
    if m.mode() != Mode::UnitDemand {
        return Err(Error::InvalidArgument("regularized program needs a unit-demand market".into()));
    }
    check_dim(m.dim(), x_hat.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be > 0, got {eta}")));
    }
    if !m.feasible.contains(x_hat) {
        return Err(Error::InvalidArgument("bundle is outside the simplex".into()));
    }
    let support: Vec<usize> = (0..m.dim()).filter(|&j| x_hat[j] > 0.0).collect();
    let k = support.len();
    let values: Vec<(f64, Vec<f64>)> = m
        .distribution
        .types()
        .iter()
        .map(|t| match &t.valuation {
            Valuation::LinearUnitDemand { v } => (t.weight, support.iter().map(|&j| v[j]).collect()),
            _ => unreachable!("unit-demand market"),
        })
        .collect();
    let target: Vec<f64> = support.iter().map(|&j| x_hat[j]).collect();
    let mut p = vec![0.0; k];
    let demand_at = |p: &[f64]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut demand = vec![0.0; k];
        let alloc: Vec<Vec<f64>> = values
            .iter()
            .map(|(w, v)| {
                let u: Vec<f64> = v.iter().zip(p).map(|(a, b)| a - b).collect();
                let x = softmax(&u, eta);
                axpy(&mut demand, *w, &x);
                x
            })
            .collect();
        (alloc, demand)
    };
    let mut residual = f64::INFINITY;
    for _ in 0..1_000_000 {
        let (_, demand) = demand_at(&p);
        residual = demand
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= tol {
            break;
        }
        for j in 0..k {
            p[j] += eta * (demand[j] / target[j]).ln();
        }
    }
    if residual > tol {
        return Err(Error::SolverFailure {
            iterations: 1_000_000,
            residual,
        });
    }
    let shift = p.iter().cloned().fold(f64::INFINITY, f64::min);
    p.iter_mut().for_each(|v| *v -= shift);
    let (alloc_s, demand) = demand_at(&p);
    let mut allocations = Vec::with_capacity(values.len());
    let mut value = 0.0;
    for ((w, v), xs) in values.iter().zip(&alloc_s) {
        let entropy = crate::vector::entropy(xs);
        value += w * (dot(v, xs) + eta * entropy);
        let mut x = vec![0.0; m.dim()];
        for (s, &j) in support.iter().enumerate() {
            x[j] = xs[s];
        }
        allocations.push(x);
    }
    let mut dual_prices = vec![None; m.dim()];
    let mut saturation = x_hat.to_vec();
    for (s, &j) in support.iter().enumerate() {
        dual_prices[j] = Some(p[s]);
        saturation[j] -= demand[s];
    }
    Ok(RegularizedScpSolution {
        allocations,
        value,
        dual_prices,
        saturation_residuals: saturation,
    })
}
