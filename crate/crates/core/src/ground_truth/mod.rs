//! Exact oracles for evaluating the learning algorithms: the per-bundle
//! welfare program, the optimal-lottery benchmark, and randomized checks of
//! the structural facts the algorithms rely on.
//!
//! Everything here reads buyer valuations directly.

pub mod lp;
mod scp;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use scp::{
    check_saturation, grid_val, solve_regularized_scp, solve_scp, sw_of_bundle, RegularizedScpSolution,
    ScpSolution, MAX_SWEEPS, SCP_TOL,
};

use crate::error::{check_dim, Error, Result};
use crate::market::{MarketInstance, Mode};
use crate::types::{FeasibleSet, PriceVector, SupplyVector};
use crate::valuations::Valuation;
use crate::vector::{dot, norm1};

/// `g(p) = sum_i psi_i max_{x in F} [v_i(x) - <p, x>] + <p, x_hat>`.
pub fn dual_objective(m: &MarketInstance, x_hat: &[f64], p: &PriceVector) -> Result<f64> {
    check_dim(m.dim(), x_hat.len())?;
    check_dim(m.dim(), p.len())?;
    let mut total = dot(p, x_hat);
    for (i, t) in m.distribution.types().iter().enumerate() {
        let x = m.response(i, p)?;
        total += t.weight * (t.valuation.value(&x)? - dot(p, &x));
    }
    Ok(total)
}

/// The optimal lottery and where it is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lottery {
    pub value: f64,
    /// Expected consumption of each good.
    pub bundle: Vec<f64>,
    /// Allocation of each buyer type (a distribution over items in unit
    /// demand, a bundle for divisible goods).
    pub allocations: Vec<Vec<f64>>,
}

/// `OPT^lot`: best expected welfare of any allocation lottery whose
/// expected consumption stays within `s`.
pub fn opt_lottery(m: &MarketInstance, s: &SupplyVector) -> Result<f64> {
    Ok(opt_lottery_solution(m, s)?.value)
}

pub fn opt_lottery_solution(m: &MarketInstance, s: &SupplyVector) -> Result<Lottery> {
    check_dim(m.dim(), s.len())?;
    match m.mode() {
        Mode::UnitDemand => unit_demand_lottery(m, s),
        Mode::Divisible => {
            // Strong duality: prices c + q with q >= 0 clear the supply
            // constraints, and the buyers' responses form the allocation.
            let sol = scp::minimize_dual(m, s, &m.costs, SCP_TOL)?;
            let mut value = 0.0;
            for (t, x) in m.distribution.types().iter().zip(&sol.allocations) {
                value += t.weight * (t.valuation.value(x)? - dot(&m.costs, x));
            }
            Ok(Lottery {
                value,
                bundle: sol.demand,
                allocations: sol.allocations.into_iter().map(|b| b.into_vec()).collect(),
            })
        }
    }
}

fn unit_demand_lottery(m: &MarketInstance, s: &SupplyVector) -> Result<Lottery> {
    let d = m.dim();
    let types = m.distribution.types();
    let n = types.len();
    let mut lp = lp::LinearProgram {
        objective: vec![0.0; n * d],
        ..Default::default()
    };
    for (i, t) in types.iter().enumerate() {
        let Valuation::LinearUnitDemand { v } = &t.valuation else {
            unreachable!("unit-demand market");
        };
        for j in 0..d {
            lp.objective[i * d + j] = t.weight * (v[j] - m.costs[j]);
        }
        let mut row = vec![0.0; n * d];
        row[i * d..(i + 1) * d].iter_mut().for_each(|x| *x = 1.0);
        lp.a_eq.push(row);
        lp.b_eq.push(1.0);
    }
    for j in 0..d {
        let mut row = vec![0.0; n * d];
        for (i, t) in types.iter().enumerate() {
            row[i * d + j] = t.weight;
        }
        lp.a_ub.push(row);
        lp.b_ub.push(s[j]);
    }
    let sol = lp::maximize(&lp)?;
    let allocations: Vec<Vec<f64>> = (0..n).map(|i| sol.x[i * d..(i + 1) * d].to_vec()).collect();
    let bundle = (0..d)
        .map(|j| types.iter().zip(&allocations).map(|(t, x)| t.weight * x[j]).sum())
        .collect();
    Ok(Lottery {
        value: sol.value,
        bundle,
        allocations,
    })
}

/// Which structural property a witness violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Concavity,
    Holder,
    Supergradient,
    Saturation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub property: Property,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// How far the inequality missed, beyond the tolerance.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StructuralReport {
    pub trials: usize,
    pub violations: Vec<Violation>,
    /// Trials whose saturation failed on an instance flagged as possibly
    /// satiated; these are reported, not counted as violations.
    pub saturation_flagged: usize,
    /// Smallest slack seen per property (negative means violated).
    pub min_slack: [f64; 4],
    /// First point of each trial with its dual prices and `SW`.
    pub points: Vec<TrialPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPoint {
    pub bundle: Vec<f64>,
    pub prices: Vec<f64>,
    pub welfare: f64,
}

impl StructuralReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, property: Property) -> usize {
        self.violations.iter().filter(|v| v.property == property).count()
    }
}

/// Tolerance of every structural inequality.
pub const STRUCTURAL_TOL: f64 = 1e-5;

/// A random point well inside `set`.
pub fn interior_point<R: Rng + ?Sized>(set: &FeasibleSet, rng: &mut R) -> Vec<f64> {
    let (lower, upper) = set.bounds();
    if set.is_simplex_like() {
        let e: Vec<f64> = (0..set.dim()).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
        let s: f64 = e.iter().sum();
        let c = set.center();
        let y: Vec<f64> = e.iter().zip(&c).map(|(v, c)| 0.9 * v / s + 0.1 * c).collect();
        crate::types::project_unchecked(set, &y)
    } else {
        lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| l + (u - l) * (0.02 + 0.96 * rng.gen::<f64>()))
            .collect()
    }
}

/// Randomized checks over `trials` pairs of interior bundles: midpoint
/// concavity of `SW`, Hölder continuity of `VAL`, the supergradient
/// inequality with the dual prices, and supply saturation.
pub fn structural_checks<R: Rng + ?Sized>(
    m: &MarketInstance,
    trials: usize,
    rng: &mut R,
) -> Result<StructuralReport> {
    if m.mode() != Mode::Divisible {
        return Err(Error::InvalidArgument("structural checks cover divisible goods".into()));
    }
    let reg = m.regularity();
    let d = m.dim() as f64;
    let mut report = StructuralReport {
        trials,
        min_slack: [f64::INFINITY; 4],
        ..Default::default()
    };
    let note = |report: &mut StructuralReport, property: Property, slack: f64, x: &[f64], y: &[f64]| {
        let k = property as usize;
        report.min_slack[k] = report.min_slack[k].min(slack);
        if slack < -STRUCTURAL_TOL {
            report.violations.push(Violation {
                property,
                x: x.to_vec(),
                y: y.to_vec(),
                excess: -slack - STRUCTURAL_TOL,
            });
        }
    };
    for _ in 0..trials {
        let x = interior_point(&m.feasible, rng);
        let y = interior_point(&m.feasible, rng);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let sx = solve_scp(m, &x, SCP_TOL)?;
        let sy = solve_scp(m, &y, SCP_TOL)?;
        let sm = solve_scp(m, &mid, SCP_TOL)?;
        let sw = |s: &ScpSolution, b: &[f64]| s.value - dot(&m.costs, b);
        let (wx, wy, wm) = (sw(&sx, &x), sw(&sy, &y), sw(&sm, &mid));

        report.points.push(TrialPoint {
            bundle: x.clone(),
            prices: sx.dual_prices.to_vec(),
            welfare: wx,
        });
        note(&mut report, Property::Concavity, wm - 0.5 * (wx + wy), &x, &y);

        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let holder = d.powf(1.0 - reg.beta) * reg.lambda * norm1(&diff).powf(reg.beta);
        note(&mut report, Property::Holder, holder - (sx.value - sy.value).abs(), &x, &y);

        let g: Vec<f64> = sx.dual_prices.iter().zip(m.costs.iter()).map(|(p, c)| p - c).collect();
        let step: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
        note(&mut report, Property::Supergradient, wx + dot(&g, &step) - wy, &x, &y);

        if m.saturation_warning() {
            if !check_saturation(&sx, &x) {
                report.saturation_flagged += 1;
            }
        } else {
            let residual = crate::vector::norm_inf(&sx.saturation_residuals);
            note(&mut report, Property::Saturation, -residual, &x, &x);
        }
    }
    Ok(report)
}
