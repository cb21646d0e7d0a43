//! Buyer valuation families and best responses.
//!
//! A buyer facing prices `p` buys the quasilinear-utility maximizer
//! `argmax_{x in F} v(x) - <p, x>`. Strong concavity of `v` makes it unique.
//! Unit-demand buyers pick a single item, and their entropy-regularized
//! counterparts respond with a softmax.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::types::{project_unchecked, Bundle, FeasibleSet, PriceVector};
use crate::vector;

/// Iteration cap of the projected-ascent best-response solver.
pub const ASCENT_MAX_ITERS: usize = 100_000;
/// KKT (gradient-mapping) residual at which projected ascent stops.
pub const ASCENT_TOL: f64 = 1e-7;

/// Constants of a valuation class over a feasible set: `v` is
/// `sigma`-strongly concave and `(lambda, beta)`-Hölder in the l1 norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    pub lambda: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl Regularity {
    /// Constants valid for every member of a family at once.
    pub fn combine(items: impl IntoIterator<Item = Regularity>) -> Option<Regularity> {
        items.into_iter().reduce(|a, b| Regularity {
            lambda: a.lambda.max(b.lambda),
            beta: a.beta.min(b.beta),
            sigma: a.sigma.min(b.sigma),
        })
    }

    /// Constants of `x -> <v, x> + eta H(x)` over the simplex with `dim`
    /// coordinates: `eta`-strongly concave and `(sqrt(dim) + vmax, 1/2)`-Hölder.
    pub fn entropy_regularized(dim: usize, vmax: f64, eta: f64) -> Regularity {
        Regularity {
            lambda: (dim as f64).sqrt() + vmax,
            beta: 0.5,
            sigma: eta,
        }
    }
}

/// One buyer type's value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Valuation {
    /// `v(x) = sum_j a_j x_j^exponent`, `0 < exponent < 1`.
    SeparablePower { a: Vec<f64>, exponent: f64 },
    /// `v(x) = <a, x> - x^T Q x / 2` with `Q` symmetric positive definite.
    Quadratic { a: Vec<f64>, q: Vec<Vec<f64>> },
    /// Unit-demand item values; the last entry is the dummy good and is 0.
    LinearUnitDemand { v: Vec<f64> },
}

impl Valuation {
    pub fn separable_power(a: Vec<f64>, exponent: f64) -> Result<Self> {
        let v = Valuation::SeparablePower { a, exponent };
        v.validate()?;
        Ok(v)
    }

    pub fn quadratic(a: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let v = Valuation::Quadratic { a, q };
        v.validate()?;
        Ok(v)
    }

    pub fn linear_unit_demand(v: Vec<f64>) -> Result<Self> {
        let v = Valuation::LinearUnitDemand { v };
        v.validate()?;
        Ok(v)
    }

    /// Checks the family invariants. Deserialized valuations must pass this
    /// before use.
    pub fn validate(&self) -> Result<()> {
        match self {
            Valuation::SeparablePower { a, exponent } => {
                if a.is_empty() || a.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::InvalidArgument(
                        "separable power coefficients must be finite and > 0".into(),
                    ));
                }
                if !(*exponent > 0.0 && *exponent < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "separable power exponent must lie in (0, 1), got {exponent}"
                    )));
                }
            }
            Valuation::Quadratic { a, q } => {
                let d = a.len();
                if d == 0 || q.len() != d || q.iter().any(|row| row.len() != d) {
                    return Err(Error::InvalidArgument(format!(
                        "quadratic valuation needs a {d}x{d} matrix"
                    )));
                }
                for i in 0..d {
                    for j in 0..d {
                        if !q[i][j].is_finite() || (q[i][j] - q[j][i]).abs() > 1e-12 {
                            return Err(Error::InvalidArgument(
                                "quadratic matrix must be finite and symmetric".into(),
                            ));
                        }
                    }
                }
                let (lo, _) = eigen_range(q);
                if lo <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "quadratic matrix must be positive definite (min eigenvalue {lo})"
                    )));
                }
            }
            Valuation::LinearUnitDemand { v } => {
                if v.len() < 2 {
                    return Err(Error::InvalidArgument(
                        "unit-demand values need at least one real good plus the dummy".into(),
                    ));
                }
                let (real, dummy) = v.split_at(v.len() - 1);
                if dummy[0] != 0.0 {
                    return Err(Error::InvalidArgument(
                        "the dummy good's value must be exactly 0".into(),
                    ));
                }
                if real.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(Error::InvalidArgument(
                        "unit-demand values must be finite and > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of goods (including the dummy for unit-demand values).
    pub fn dim(&self) -> usize {
        match self {
            Valuation::SeparablePower { a, .. } | Valuation::Quadratic { a, .. } => a.len(),
            Valuation::LinearUnitDemand { v } => v.len(),
        }
    }

    pub fn is_unit_demand(&self) -> bool {
        matches!(self, Valuation::LinearUnitDemand { .. })
    }

    /// Largest item value (unit-demand) or 0.
    pub fn max_item_value(&self) -> f64 {
        match self {
            Valuation::LinearUnitDemand { v } => v.iter().cloned().fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if let Some(j) = x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "bundle coordinate {j} must be finite and >= 0, got {}",
                x[j]
            )));
        }
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Valuation::SeparablePower { a, exponent } => a
                .iter()
                .zip(x)
                .map(|(aj, xj)| aj * xj.powf(*exponent))
                .sum(),
            Valuation::Quadratic { a, q } => {
                let qx = mat_vec(q, x);
                vector::dot(a, x) - 0.5 * vector::dot(x, &qx)
            }
            Valuation::LinearUnitDemand { v } => vector::dot(v, x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if let Some(j) = x.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "bundle coordinate {j} must be finite and >= 0, got {}",
                x[j]
            )));
        }
        if let Valuation::SeparablePower { .. } = self {
            if let Some(j) = x.iter().position(|v| *v == 0.0) {
                return Err(Error::SingularGradient { coordinate: j });
            }
        }
        Ok(self.gradient_unchecked(x))
    }

    fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Valuation::SeparablePower { a, exponent } => a
                .iter()
                .zip(x)
                .map(|(aj, xj)| aj * exponent * xj.powf(exponent - 1.0))
                .collect(),
            Valuation::Quadratic { a, q } => vector::sub(a, &mat_vec(q, x)),
            Valuation::LinearUnitDemand { v } => v.clone(),
        }
    }

    /// Strong-concavity modulus over `set`.
    ///
    /// For the separable family the Hessian is diagonal with magnitude
    /// `a_j e (1 - e) x_j^(e - 2)`, smallest at the upper corner.
    pub fn strong_concavity(&self, set: &FeasibleSet) -> f64 {
        match self {
            Valuation::SeparablePower { a, exponent } => {
                let (_, upper) = set.bounds();
                a.iter()
                    .zip(&upper)
                    .map(|(aj, u)| aj * exponent * (1.0 - exponent) * u.powf(exponent - 2.0))
                    .fold(f64::INFINITY, f64::min)
            }
            Valuation::Quadratic { q, .. } => eigen_range(q).0,
            Valuation::LinearUnitDemand { .. } => 0.0,
        }
    }

    /// l1 Hölder constants `(lambda, beta)` over `set`.
    pub fn holder(&self, set: &FeasibleSet) -> (f64, f64) {
        match self {
            Valuation::SeparablePower { a, exponent } => (a.iter().sum(), *exponent),
            Valuation::Quadratic { a, q } => {
                // sup_F ||a - Qx||_inf bounds the l1-Lipschitz constant.
                let (lower, upper) = set.bounds();
                let span: Vec<f64> = lower
                    .iter()
                    .zip(&upper)
                    .map(|(l, u)| l.abs().max(u.abs()))
                    .collect();
                let row_bound = q
                    .iter()
                    .map(|row| row.iter().zip(&span).map(|(qij, s)| qij.abs() * s).sum::<f64>())
                    .fold(0.0, f64::max);
                (vector::norm_inf(a) + row_bound, 1.0)
            }
            Valuation::LinearUnitDemand { v } => (vector::norm_inf(v), 1.0),
        }
    }

    pub fn regularity(&self, set: &FeasibleSet) -> Regularity {
        let (lambda, beta) = self.holder(set);
        Regularity {
            lambda,
            beta,
            sigma: self.strong_concavity(set),
        }
    }

    /// Whether `a - Qx` can turn negative somewhere on the bounding box of
    /// `set`, in which case supply saturation is not guaranteed.
    pub fn may_satiate(&self, set: &FeasibleSet) -> bool {
        match self {
            Valuation::Quadratic { a, q } => {
                let (lower, upper) = set.bounds();
                a.iter().zip(q).any(|(aj, row)| {
                    let worst: f64 = row
                        .iter()
                        .zip(lower.iter().zip(&upper))
                        .map(|(qjk, (l, u))| (qjk * l).max(qjk * u))
                        .sum();
                    aj - worst < 0.0
                })
            }
            _ => false,
        }
    }

    /// The buyer's utility-maximizing bundle `argmax_{x in F} v(x) - <p, x>`.
    pub fn buyer_response(&self, p: &PriceVector, set: &FeasibleSet) -> Result<Bundle> {
        check_dim(self.dim(), p.len())?;
        check_dim(self.dim(), set.dim())?;
        let x = match (self, set) {
            (Valuation::SeparablePower { a, exponent }, FeasibleSet::Box { lower, upper }) => a
                .iter()
                .zip(p.iter())
                .zip(lower.iter().zip(upper))
                .map(|((aj, pj), (l, u))| {
                    if *pj <= 0.0 {
                        *u
                    } else {
                        (aj * exponent / pj).powf(1.0 / (1.0 - exponent)).clamp(*l, *u)
                    }
                })
                .collect(),
            (Valuation::SeparablePower { a, exponent }, _) => {
                separable_on_simplex(a, *exponent, p, set)
            }
            (Valuation::Quadratic { q, .. }, _) => {
                let (_, l_max) = eigen_range(q);
                let start = set.center();
                projected_ascent(set, &start, l_max, |x| {
                    vector::sub(&self.gradient_unchecked(x), p)
                })?
            }
            (Valuation::LinearUnitDemand { v }, FeasibleSet::Simplex { .. }) => {
                let mut x = vec![0.0; v.len()];
                x[unit_demand_choice(v, p)] = 1.0;
                x
            }
            (Valuation::LinearUnitDemand { v }, FeasibleSet::BoxedSimplex { lower, upper }) => {
                linear_on_boxed_simplex(&vector::sub(v, p), lower, upper)
            }
            (Valuation::LinearUnitDemand { .. }, FeasibleSet::Box { .. }) => {
                return Err(Error::InvalidArgument(
                    "unit-demand valuations are defined on the simplex, not a box".into(),
                ))
            }
        };
        Bundle::new(x)
    }
}

/// The unit-demand choice `argmax_j v_j - p_j` (0-based; the dummy good is
/// the last index). Ties go to the lowest index.
pub fn unit_demand_choice(v: &[f64], p: &[f64]) -> usize {
    let u: Vec<f64> = v.iter().zip(p).map(|(a, b)| a - b).collect();
    vector::argmax(&u)
}

/// Response of the entropy-regularized buyer `<v, x> + eta H(x)` on the
/// simplex: `x_j ∝ exp((v_j - p_j) / eta)`.
pub fn regularized_response(v: &[f64], p: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_dim(v.len(), p.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "regularization eta must be > 0, got {eta}"
        )));
    }
    let u = vector::sub(v, p);
    Ok(vector::softmax(&u, eta))
}

fn mat_vec(q: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    q.iter().map(|row| vector::dot(row, x)).collect()
}

/// `(min eigenvalue, max eigenvalue)` of a symmetric matrix.
fn eigen_range(q: &[Vec<f64>]) -> (f64, f64) {
    let d = q.len();
    let m = DMatrix::from_fn(d, d, |i, j| q[i][j]);
    let eig = SymmetricEigen::new(m).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// KKT solve of the separable power response on a (boxed) simplex:
/// `x_j(mu) = clamp((a_j e / (p_j + mu))^(1/(1-e)), l_j, u_j)` with `mu`
/// chosen so the coordinates sum to one.
fn separable_on_simplex(a: &[f64], e: f64, p: &[f64], set: &FeasibleSet) -> Vec<f64> {
    let (lower, upper) = set.bounds();
    let coords = |mu: f64| -> Vec<f64> {
        a.iter()
            .zip(p)
            .zip(lower.iter().zip(&upper))
            .map(|((aj, pj), (l, u))| {
                let denom = pj + mu;
                if denom <= 0.0 {
                    *u
                } else {
                    (aj * e / denom).powf(1.0 / (1.0 - e)).clamp(*l, *u)
                }
            })
            .collect()
    };
    let min_p = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lo = -min_p;
    let mut hi = lo.abs() + 1.0;
    while coords(hi).iter().sum::<f64>() > 1.0 {
        hi = 2.0 * hi + 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if coords(mid).iter().sum::<f64>() > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = coords(0.5 * (lo + hi));
    // Remove the bisection residue along the simplex.
    project_unchecked(set, &x)
}

/// Maximizer of a linear objective over `{sum x = 1, l <= x <= u}`: start
/// from the lower bounds and pour the remaining mass into the best items.
fn linear_on_boxed_simplex(u: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let mut x = lower.to_vec();
    let mut left = 1.0 - lower.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&i, &j| u[j].partial_cmp(&u[i]).unwrap().then(i.cmp(&j)));
    for j in order {
        if left <= 0.0 {
            break;
        }
        let add = (upper[j] - lower[j]).min(left);
        x[j] += add;
        left -= add;
    }
    x
}

/// Projected gradient ascent with step `1 / smoothness`, stopped on the
/// gradient-mapping residual.
pub(crate) fn projected_ascent(
    set: &FeasibleSet,
    start: &[f64],
    smoothness: f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let step = 1.0 / smoothness;
    let mut x = project_unchecked(set, start);
    let mut residual = f64::INFINITY;
    for _ in 0..ASCENT_MAX_ITERS {
        let g = grad(&x);
        let mut y = x.clone();
        vector::axpy(&mut y, step, &g);
        let next = project_unchecked(set, &y);
        residual = vector::dist2(&next, &x) * smoothness;
        x = next;
        if residual <= ASCENT_TOL {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure {
        iterations: ASCENT_MAX_ITERS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sqrt_buyer() -> Valuation {
        Valuation::separable_power(vec![1.0], 0.5).unwrap()
    }

    fn prices(p: &[f64]) -> PriceVector {
        PriceVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn value_examples() {
        assert!((sqrt_buyer().value(&[0.25]).unwrap() - 0.5).abs() < 1e-15);
        let q = Valuation::quadratic(vec![1.0, 2.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(q.value(&[0.0, 0.0]).unwrap(), 0.0);
        let v = Valuation::separable_power(vec![2.0, 1.0], 0.5).unwrap();
        assert!((v.value(&[1.0, 4.0]).unwrap() - 4.0).abs() < 1e-15);
        assert!(v.value(&[-1.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        assert!((sqrt_buyer().gradient(&[0.25]).unwrap()[0] - 1.0).abs() < 1e-15);
        let q = Valuation::quadratic(vec![1.0, 2.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(q.gradient(&[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        let g = q.gradient(&[1.0, 1.0]).unwrap();
        assert!((g[0] - (1.0 - 2.5)).abs() < 1e-15 && (g[1] - (2.0 - 1.5)).abs() < 1e-15);
        let v = Valuation::separable_power(vec![1.0, 1.0], 0.5).unwrap();
        assert_eq!(v.gradient(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(
            v.gradient(&[1.0, 0.0]),
            Err(Error::SingularGradient { coordinate: 1 })
        );
    }

    #[test]
    fn constructors_enforce_invariants() {
        assert!(Valuation::separable_power(vec![1.0], 1.0).is_err());
        assert!(Valuation::separable_power(vec![0.0], 0.5).is_err());
        assert!(Valuation::quadratic(vec![1.0, 1.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(Valuation::linear_unit_demand(vec![1.0, 0.5]).is_err());
        assert!(Valuation::linear_unit_demand(vec![1.0, 0.0, 0.0]).is_err());
        assert!(Valuation::linear_unit_demand(vec![1.0, 0.2, 0.0]).is_ok());
    }

    #[test]
    fn best_response_examples() {
        let f = FeasibleSet::unit_box(1);
        let x = sqrt_buyer().buyer_response(&prices(&[1.0]), &f).unwrap();
        assert!((x[0] - 0.25).abs() < 1e-15);
        let x = sqrt_buyer().buyer_response(&prices(&[0.25]), &f).unwrap();
        assert_eq!(x[0], 1.0);
        let v = Valuation::separable_power(vec![1.0, 3.0], 0.5).unwrap();
        let x = v
            .buyer_response(&prices(&[1e6, 1e6]), &FeasibleSet::unit_box(2))
            .unwrap();
        assert!(x.iter().all(|xj| *xj <= 1e-7));
    }

    #[test]
    fn unit_demand_examples() {
        assert_eq!(unit_demand_choice(&[5.0, 1.0, 0.0], &[1.0, -2.0, 0.5]), 0);
        assert_eq!(unit_demand_choice(&[1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]), 0);
        assert_eq!(unit_demand_choice(&[0.1, 0.1, 0.0], &[5.0, 5.0, 0.0]), 2);
    }

    #[test]
    fn regularized_response_examples() {
        let e = std::f64::consts::E;
        let x = regularized_response(&[1.0, 0.0, 0.0], &[0.0; 3], 1.0).unwrap();
        let want = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
        for j in 0..3 {
            assert!((x[j] - want[j]).abs() < 1e-12);
        }
        assert!((want[0] - 0.5761).abs() < 1e-4 && (want[1] - 0.2119).abs() < 1e-4);

        let x = regularized_response(&[0.3, 0.3, 0.0], &[0.3, 0.3, 0.0], 0.7).unwrap();
        assert!(x.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));

        let x = regularized_response(&[1.0, 0.5, 0.0], &[0.2, 0.0, 0.0], 1e-4).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-3);

        assert!(regularized_response(&[1.0, 0.0], &[0.0, 0.0], 0.0).is_err());
    }

    /// Grid maximization of `<u, x> + H(x)` over the 3-simplex.
    #[test]
    fn regularized_response_matches_grid_maximizer() {
        let u = [1.0, 0.0, 0.0];
        let n = 1000;
        let mut best = (f64::NEG_INFINITY, [0.0; 3]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let x = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let val = vector::dot(&u, &x) + vector::entropy(&x);
                if val > best.0 {
                    best = (val, x);
                }
            }
        }
        let x = regularized_response(&u, &[0.0; 3], 1.0).unwrap();
        for j in 0..3 {
            assert!((x[j] - best.1[j]).abs() <= 2e-3);
        }
    }

    #[test]
    fn quadratic_response_reaches_kkt() {
        let v = Valuation::quadratic(vec![1.0, 0.8], vec![vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let f = FeasibleSet::unit_box(2);
        let p = prices(&[0.2, 0.1]);
        let x = v.buyer_response(&p, &f).unwrap();
        let g = vector::sub(&v.gradient(&x).unwrap(), &p);
        // Interior coordinates have zero marginal utility.
        for j in 0..2 {
            if x[j] > 1e-6 && x[j] < 1.0 - 1e-6 {
                assert!(g[j].abs() < 1e-6, "{g:?}");
            }
        }
    }

    #[test]
    fn separable_power_on_simplex_is_kkt_point() {
        let v = Valuation::separable_power(vec![1.0, 2.0, 0.5], 0.5).unwrap();
        let f = FeasibleSet::simplex(3).unwrap();
        let p = prices(&[0.3, 0.1, 0.0]);
        let x = v.buyer_response(&p, &f).unwrap();
        assert!(f.contains(&x));
        let g = vector::sub(&v.gradient(&x).unwrap(), &p);
        // Equal marginal utilities across all (interior) coordinates.
        assert!((g[0] - g[1]).abs() < 1e-8 && (g[1] - g[2]).abs() < 1e-8);
    }

    #[test]
    fn satiation_flag() {
        let f = FeasibleSet::unit_box(2);
        let sat = Valuation::quadratic(vec![0.5, 0.5], vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!(sat.may_satiate(&f));
        let ok = Valuation::quadratic(vec![3.0, 3.0], vec![vec![1.0, 0.2], vec![0.2, 1.0]]).unwrap();
        assert!(!ok.may_satiate(&f));
        assert!(!sqrt_buyer().may_satiate(&FeasibleSet::unit_box(1)));
    }

    fn random_valuation(rng: &mut ChaCha8Rng, d: usize) -> Valuation {
        if rng.gen_bool(0.5) {
            let a = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
            Valuation::separable_power(a, rng.gen_range(0.2..0.8)).unwrap()
        } else {
            let a: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..3.0)).collect();
            let mut q = vec![vec![0.0; d]; d];
            for i in 0..d {
                q[i][i] = rng.gen_range(1.0..3.0);
                for j in 0..i {
                    let off = rng.gen_range(-0.3..0.3);
                    q[i][j] = off;
                    q[j][i] = off;
                }
            }
            Valuation::quadratic(a, q).unwrap()
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..1000 {
            let d = rng.gen_range(1..4);
            let v = random_valuation(&mut rng, d);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
            let g = v.gradient(&x).unwrap();
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (v.value(&xp).unwrap() - v.value(&xm).unwrap()) / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-8);
                assert!(rel < 1e-4 || (fd - g[j]).abs() < 1e-8, "fd {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn best_response_dominates_random_bundles_and_strong_concavity_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let d = rng.gen_range(1..4);
            let v = random_valuation(&mut rng, d);
            let f = FeasibleSet::unit_box(d);
            let p = prices(&(0..d).map(|_| rng.gen_range(0.0..3.0)).collect::<Vec<_>>());
            let x = v.buyer_response(&p, &f).unwrap();
            let u = |y: &[f64]| v.value(y).unwrap() - vector::dot(&p, y);
            let ux = u(&x);
            let sigma = v.strong_concavity(&f);
            for _ in 0..100 {
                let y: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
                let uy = u(&y);
                assert!(ux >= uy - 1e-6);
                let dist_sq = vector::dist2(&x, &y).powi(2);
                assert!(dist_sq <= (2.0 / sigma) * (ux - uy) + 1e-6);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn regularized_response_is_a_positive_distribution(
            v in proptest::collection::vec(0.01f64..5.0, 1..6),
            p in proptest::collection::vec(0.0f64..5.0, 6),
            eta in 0.05f64..5.0,
        ) {
            let mut vals = v.clone();
            vals.push(0.0);
            let p = &p[..vals.len().min(6)];
            let vals = &vals[..p.len()];
            let x = regularized_response(vals, p, eta).unwrap();
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(x.iter().all(|xj| *xj > 0.0));
        }
    }

    #[test]
    fn holder_bound_for_square_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10_000 {
            let d = rng.gen_range(1..5);
            let a: Vec<f64> = (0..d).map(|_| rng.gen_range(0.1..3.0)).collect();
            let v = Valuation::separable_power(a, 0.5).unwrap();
            let (lambda, beta) = v.holder(&FeasibleSet::unit_box(d));
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let y: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let lhs = (v.value(&x).unwrap() - v.value(&y).unwrap()).abs();
            let rhs = lambda * vector::norm1(&vector::sub(&x, &y)).powf(beta);
            assert!(lhs <= rhs + 1e-12);
        }
    }
}
