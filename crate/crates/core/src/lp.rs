//! Small dense LP solver: `max c·α  s.t.  A α <= d`, `α` free.
//!
//! Two-phase tableau simplex with Bland's rule. Free variables are split
//! as `α = u - v` with `u, v >= 0`; every row gets a slack, and rows with
//! a negative right-hand side get an artificial for phase one.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Entries at or below this magnitude are never pivoted on.
pub const PIVOT_TOL: f64 = 1e-11;
/// Reduced-cost and feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

struct Tableau {
    rows: usize,
    /// Structural + slack + artificial columns, right-hand side excluded.
    cols: usize,
    /// `rows x (cols + 1)`, right-hand side in the last column.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) -> Result<()> {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        if p.is_nan() || p.abs() <= PIVOT_TOL {
            return Err(Error::DegenerateLp(format!("pivot magnitude {p:e} too small")));
        }
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        self.data[pr * w + pc] = 1.0;
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (x, y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[pc] = 0.0;
            }
        }
        if prow.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateLp("non-finite tableau entry".into()));
        }
        self.basis[pr] = pc;
        Ok(())
    }

    /// Runs simplex iterations maximizing `cost·x` over columns in
    /// `0..allowed`. Returns `false` if the objective is unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<bool> {
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        for _ in 0..max_iter {
            // Bland: lowest-index column with negative z_j - c_j.
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = (0..self.rows)
                    .map(|r| cost[self.basis[r]] * self.at(r, j))
                    .sum();
                z - cost[j] < -FEAS_TOL
            });
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio
                                || (ratio == bratio && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Ok(false);
            };
            self.pivot(pr, pc)?;
        }
        Err(Error::DegenerateLp("iteration limit reached".into()))
    }

    fn value_of(&self, col: usize) -> f64 {
        self.basis
            .iter()
            .position(|&b| b == col)
            .map_or(0.0, |r| self.rhs(r))
    }
}

/// Maximizes `objective · α` subject to `a α <= d`.
pub fn lp_max(objective: &[f64], a: &Array2<f64>, d: &Array1<f64>) -> Result<LpOutcome> {
    let (q, p) = a.dim();
    if objective.len() != p {
        return Err(Error::shape("LP objective", p, objective.len()));
    }
    if d.len() != q {
        return Err(Error::shape("LP right-hand side", q, d.len()));
    }
    if a.iter().chain(d.iter()).chain(objective).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateLp("non-finite LP data".into()));
    }

    let neg_rows: Vec<usize> = (0..q).filter(|&i| d[i] < 0.0).collect();
    let n_struct = 2 * p;
    let n_slack = q;
    let n_art = neg_rows.len();
    let cols = n_struct + n_slack + n_art;
    let w = cols + 1;
    let mut data = vec![0.0; q * w];
    let mut basis = vec![0usize; q];
    let mut art = 0;
    for i in 0..q {
        let sign = if d[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut data[i * w..(i + 1) * w];
        for j in 0..p {
            row[j] = sign * a[(i, j)];
            row[p + j] = -sign * a[(i, j)];
        }
        row[n_struct + i] = sign;
        row[cols] = sign * d[i];
        if sign < 0.0 {
            let c = n_struct + n_slack + art;
            row[c] = 1.0;
            basis[i] = c;
            art += 1;
        } else {
            basis[i] = n_struct + i;
        }
    }
    let mut t = Tableau {
        rows: q,
        cols,
        data,
        basis,
    };

    if n_art > 0 {
        let mut cost1 = vec![0.0; cols];
        for c in cost1.iter_mut().skip(n_struct + n_slack) {
            *c = -1.0;
        }
        t.optimize(&cost1, cols)?;
        let infeas: f64 = (n_struct + n_slack..cols).map(|c| t.value_of(c)).sum();
        let scale = 1.0 + d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining (zero-valued) artificials out of the basis.
        for r in 0..q {
            if t.basis[r] >= n_struct + n_slack {
                if let Some(c) = (0..n_struct + n_slack).find(|&c| t.at(r, c).abs() > 1e-9) {
                    t.pivot(r, c)?;
                }
            }
        }
    }

    let mut cost2 = vec![0.0; cols];
    for j in 0..p {
        cost2[j] = objective[j];
        cost2[p + j] = -objective[j];
    }
    if !t.optimize(&cost2, n_struct + n_slack)? {
        return Ok(LpOutcome::Unbounded);
    }
    let point: Vec<f64> = (0..p).map(|j| t.value_of(j) - t.value_of(p + j)).collect();
    let value = point.iter().zip(objective).map(|(x, c)| x * c).sum();
    Ok(LpOutcome::Optimal { value, point })
}

/// A point of `{α : a α <= d}`, or `None` if the set is empty.
pub fn feasible_point(a: &Array2<f64>, d: &Array1<f64>) -> Result<Option<Vec<f64>>> {
    match lp_max(&vec![0.0; a.ncols()], a, d)? {
        LpOutcome::Optimal { point, .. } => Ok(Some(point)),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => unreachable!("zero objective cannot be unbounded"),
    }
}
