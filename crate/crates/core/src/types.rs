//! Domain vectors, feasible bundle sets and Euclidean projection.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::vector;

/// Absolute tolerance used for every membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

// Projection and descent arithmetic may leave -1e-17 style residue; anything
// within this band is snapped to zero when wrapping into a nonnegative vector.
const SNAP: f64 = 1e-12;

macro_rules! nonneg_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(entries: Vec<f64>) -> Result<Self> {
                let mut entries = entries;
                for (j, v) in entries.iter_mut().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            concat!($what, " entry {} is not finite"),
                            j
                        )));
                    }
                    if *v < 0.0 {
                        if *v >= -SNAP {
                            *v = 0.0;
                        } else {
                            return Err(Error::InvalidArgument(format!(
                                concat!($what, " entry {} is negative ({})"),
                                j, v
                            )));
                        }
                    }
                }
                Ok(Self(entries))
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];
            fn deref(&self) -> &[f64] {
                &self.0
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;
            fn try_from(v: Vec<f64>) -> Result<Self> {
                Self::new(v)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Vec<f64> {
                v.0
            }
        }
    };
}

nonneg_vector!(
    /// Posted prices, one per good. In unit-demand mode the last entry is
    /// the zero-priced dummy good ("buy nothing").
    PriceVector,
    "price"
);
nonneg_vector!(
    /// A (possibly fractional) quantity of each good.
    Bundle,
    "bundle"
);
nonneg_vector!(
    /// Per-unit production cost of each good.
    CostVector,
    "cost"
);

/// Per-round supply of each good. Entries are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SupplyVector(Vec<f64>);

impl SupplyVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        for (j, v) in entries.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "supply entry {j} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self(entries))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

impl Deref for SupplyVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for SupplyVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SupplyVector> for Vec<f64> {
    fn from(v: SupplyVector) -> Vec<f64> {
        v.0
    }
}

/// A closed convex set of bundles with nonempty interior.
///
/// `BoxedSimplex` is the probability simplex intersected with a box; it is
/// what the unit-demand pipeline optimizes over once the simplex has been
/// shrunk away from its boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibleSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Simplex { dim: usize },
    BoxedSimplex { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidArgument("box must have dimension >= 1".into()));
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidArgument(format!(
                    "box coordinate {j} needs finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// `[0, 1]^dim`
    pub fn unit_box(dim: usize) -> Self {
        FeasibleSet::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(
                "simplex needs at least two coordinates".into(),
            ));
        }
        Ok(FeasibleSet::Simplex { dim })
    }

    pub fn new_boxed_simplex(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && *l >= 0.0 && l < u) {
                return Err(Error::InfeasibleShrink {
                    coordinate: j,
                    lower: *l,
                    upper: *u,
                });
            }
        }
        let lo: f64 = lower.iter().sum();
        let hi: f64 = upper.iter().sum();
        if !(lo < 1.0 && hi > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "boxed simplex has no interior: sum(lower) = {lo}, sum(upper) = {hi}"
            )));
        }
        Ok(FeasibleSet::BoxedSimplex { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box { lower, .. } | FeasibleSet::BoxedSimplex { lower, .. } => lower.len(),
            FeasibleSet::Simplex { dim } => *dim,
        }
    }

    pub fn is_simplex_like(&self) -> bool {
        !matches!(self, FeasibleSet::Box { .. })
    }

    /// Coordinatewise bounds of the set.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            FeasibleSet::Box { lower, upper } | FeasibleSet::BoxedSimplex { lower, upper } => {
                (lower.clone(), upper.clone())
            }
            FeasibleSet::Simplex { dim } => (vec![0.0; *dim], vec![1.0; *dim]),
        }
    }

    /// `R >= sup_{x in F} ||x||_2`.
    pub fn norm_bound(&self) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            _ => 1.0,
        }
    }

    /// Upper bound on the l2 diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Box { lower, upper } => vector::dist2(lower, upper),
            FeasibleSet::Simplex { .. } => std::f64::consts::SQRT_2,
            FeasibleSet::BoxedSimplex { lower, upper } => {
                vector::dist2(lower, upper).min(std::f64::consts::SQRT_2)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let (lower, upper) = self.bounds();
        let in_box = x
            .iter()
            .zip(lower.iter().zip(&upper))
            .all(|(v, (l, u))| *v >= l - MEMBERSHIP_TOL && *v <= u + MEMBERSHIP_TOL);
        if !in_box {
            return false;
        }
        match self {
            FeasibleSet::Box { .. } => true,
            _ => (x.iter().sum::<f64>() - 1.0).abs() <= MEMBERSHIP_TOL,
        }
    }

    /// A point in the relative interior, used as a starting iterate.
    pub fn center(&self) -> Vec<f64> {
        match self {
            FeasibleSet::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
            FeasibleSet::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
            FeasibleSet::BoxedSimplex { .. } => {
                let d = self.dim();
                project_unchecked(self, &vec![1.0 / d as f64; d])
            }
        }
    }
}

/// Euclidean projection `argmin_{x in F} ||x - y||_2`.
pub fn project(set: &FeasibleSet, y: &[f64]) -> Result<Bundle> {
    check_dim(set.dim(), y.len())?;
    if let Some(j) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "projection input entry {j} is not finite"
        )));
    }
    let x = project_unchecked(set, y);
    // Projections onto sets with negative lower bounds are not bundles.
    Bundle::new(x)
}

/// Projection without the dimension/finiteness checks and without wrapping
/// into a [`Bundle`]; descent loops call this on every iterate.
pub fn project_unchecked(set: &FeasibleSet, y: &[f64]) -> Vec<f64> {
    match set {
        FeasibleSet::Box { lower, upper } => y
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect(),
        FeasibleSet::Simplex { .. } => project_simplex(y),
        FeasibleSet::BoxedSimplex { lower, upper } => project_boxed_simplex(y, lower, upper),
    }
}

/// Sort-and-threshold projection onto the probability simplex.
fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Projection onto `{x : sum x = 1, lower <= x <= upper}`.
///
/// The map `tau -> sum_j clamp(y_j - tau, l_j, u_j)` is nonincreasing and
/// piecewise linear; bisection brackets the active set, then the threshold
/// is solved exactly on it.
fn project_boxed_simplex(y: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let total = |tau: f64| -> f64 {
        y.iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| (v - tau).clamp(*l, *u))
            .sum()
    };
    let mut lo = y
        .iter()
        .zip(upper)
        .map(|(v, u)| v - u)
        .fold(f64::INFINITY, f64::min);
    let mut hi = y
        .iter()
        .zip(lower)
        .map(|(v, l)| v - l)
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * (1.0 + hi.abs()) {
            break;
        }
    }
    let mut tau = 0.5 * (lo + hi);
    // Exact threshold on the identified free set.
    let mut fixed = 0.0;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for (v, (l, u)) in y.iter().zip(lower.iter().zip(upper)) {
        let x = v - tau;
        if x <= *l {
            fixed += l;
        } else if x >= *u {
            fixed += u;
        } else {
            free += 1;
            free_sum += v;
        }
    }
    if free > 0 {
        let exact = (free_sum + fixed - 1.0) / free as f64;
        if exact.is_finite() && (exact - tau).abs() <= 1e-9 {
            tau = exact;
        }
    }
    y.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| (v - tau).clamp(*l, *u))
        .collect()
}

/// The shrunk set `S_xi = {x in F : xi <= x_j <= s_j - xi}`.
///
/// For a box this is again a box. For the simplex the result is a
/// [`FeasibleSet::BoxedSimplex`].
pub fn shrunk_box(set: &FeasibleSet, supply: &SupplyVector, xi: f64) -> Result<FeasibleSet> {
    check_dim(set.dim(), supply.len())?;
    if !(xi > 0.0 && xi < supply.min() / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink xi = {xi} must lie in (0, min_j s_j / 2 = {})",
            supply.min() / 2.0
        )));
    }
    let (lower, upper) = set.bounds();
    let new_lower: Vec<f64> = lower.iter().map(|l| l.max(xi)).collect();
    let new_upper: Vec<f64> = upper
        .iter()
        .zip(supply.iter())
        .map(|(u, s)| u.min(s - xi))
        .collect();
    for (j, (l, u)) in new_lower.iter().zip(&new_upper).enumerate() {
        if l >= u {
            return Err(Error::InfeasibleShrink {
                coordinate: j,
                lower: *l,
                upper: *u,
            });
        }
    }
    match set {
        FeasibleSet::Box { .. } => Ok(FeasibleSet::Box {
            lower: new_lower,
            upper: new_upper,
        }),
        _ => FeasibleSet::new_boxed_simplex(new_lower, new_upper),
    }
}
