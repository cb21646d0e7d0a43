//! Dense two-phase simplex method with Bland's rule.
//!
//! Sized for the lottery programs here: a few dozen variables. Bland's rule
//! rules out cycling on the degenerate vertices these programs have plenty
//! of.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

/// `max <c, x>` subject to `A_ub x <= b_ub`, `A_eq x = b_eq`, `x >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize, reduced: &mut [f64]) {
        let k = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= k);
        self.rhs[r] /= k;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i != r {
                let f = self.rows[i][col];
                if f != 0.0 {
                    for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                    self.rhs[i] -= f * pivot_rhs;
                }
            }
        }
        let f = reduced[col];
        for (v, p) in reduced.iter_mut().zip(&pivot_row) {
            *v -= f * p;
        }
        self.basis[r] = col;
    }

    /// Maximizes with the given reduced costs over columns `< allowed`.
    fn optimize(&mut self, reduced: &mut [f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let Some(col) = (0..allowed).find(|&j| reduced[j] > PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::InvalidArgument("linear program is unbounded".into()));
            };
            self.pivot(r, col, reduced);
        }
        Err(Error::SolverFailure {
            iterations: MAX_PIVOTS,
            residual: f64::NAN,
        })
    }
}

/// Solves the program, or reports it infeasible or unbounded.
pub fn maximize(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.objective.len();
    let m_ub = lp.a_ub.len();
    let m = m_ub + lp.a_eq.len();
    if lp.b_ub.len() != m_ub || lp.b_eq.len() != lp.a_eq.len() {
        return Err(Error::InvalidArgument("constraint and bound counts differ".into()));
    }
    if lp.a_ub.iter().chain(&lp.a_eq).any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("constraint row length differs from objective".into()));
    }
    // Columns: originals, one slack per inequality, one artificial per row.
    let width = n + m_ub + m;
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, (a, b)) in lp
        .a_ub
        .iter()
        .zip(&lp.b_ub)
        .chain(lp.a_eq.iter().zip(&lp.b_eq))
        .enumerate()
    {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(a);
        if i < m_ub {
            row[n + i] = 1.0;
        }
        let mut b = *b;
        if b < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            b = -b;
        }
        row[n + m_ub + i] = 1.0;
        rows.push(row);
        rhs.push(b);
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (n + m_ub..width).collect(),
    };

    // Phase one: drive the artificials to zero.
    let mut reduced = vec![0.0; width];
    for row in &t.rows {
        for j in 0..n + m_ub {
            reduced[j] += row[j];
        }
    }
    t.optimize(&mut reduced, n + m_ub)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(b, _)| **b >= n + m_ub)
        .map(|(_, v)| *v)
        .sum();
    if infeasibility > 1e-7 {
        return Err(Error::InvalidArgument(format!(
            "linear program is infeasible (phase-one residual {infeasibility:e})"
        )));
    }
    for r in 0..m {
        if t.basis[r] >= n + m_ub {
            if let Some(col) = (0..n + m_ub).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                let mut scratch = vec![0.0; width];
                t.pivot(r, col, &mut scratch);
            }
        }
    }

    // Phase two on the original objective.
    let cost = |j: usize| if j < n { lp.objective[j] } else { 0.0 };
    let mut reduced: Vec<f64> = (0..width).map(cost).collect();
    for (r, &b) in t.basis.iter().enumerate() {
        let cb = cost(b);
        if cb != 0.0 {
            for j in 0..width {
                reduced[j] -= cb * t.rows[r][j];
            }
        }
    }
    t.optimize(&mut reduced, n + m_ub)?;
    let mut x = vec![0.0; n];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < n {
            x[b] = t.rhs[r].max(0.0);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { value, x })
}
