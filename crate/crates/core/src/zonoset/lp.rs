//! Small dense simplex used for zonotope membership.
//!
//! Solves `min ‖β‖∞  s.t.  G β = d` with a two-phase tableau method and
//! Bland's anti-cycling rule. Problem sizes here are tiny (n ≤ 3 rows,
//! a few dozen generators), so a dense tableau is the right tool.

use nalgebra::{DMatrix, DVector};

/// Feasibility tolerance for equality residuals and the final norm bound.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 10_000;

struct Tableau {
    rows: usize,
    cols: usize,
    // rows × (cols + 1); the last column is the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let width = self.cols + 1;
        let p = self.data[pr * width + pc];
        for c in 0..width {
            self.data[pr * width + c] /= p;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * width + pc];
            if f == 0.0 {
                continue;
            }
            for c in 0..width {
                let v = self.data[pr * width + c];
                self.data[r * width + c] -= f * v;
            }
            self.data[r * width + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Minimizes `cost · x` over columns `allowed`. Returns false when the
    /// pivot budget is exhausted (never observed on the problems we build).
    fn minimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> bool {
        for _ in 0..MAX_PIVOTS {
            // Bland: first improving column.
            let mut entering = None;
            for j in 0..self.cols {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j];
                for r in 0..self.rows {
                    reduced -= cost[self.basis[r]] * self.at(r, j);
                }
                if reduced < -PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(pc) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-15 || (ratio <= lratio + 1e-15 && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            match leaving {
                Some((pr, _)) => self.pivot(pr, pc),
                // Unbounded; impossible for a nonnegative objective.
                None => return true,
            }
        }
        false
    }
}

/// Minimum of `‖β‖∞` over all `β` with `G β = d`, or `None` when `d` is not
/// in the range of `G` (within [`FEASIBILITY_TOL`], scaled to the data).
pub fn min_inf_norm(g: &DMatrix<f64>, d: &DVector<f64>) -> Option<f64> {
    let n = g.nrows();
    let e = g.ncols();
    let scale = 1.0_f64.max(d.amax()).max(if e > 0 { g.amax() } else { 0.0 });
    if e == 0 {
        return (d.amax() <= FEASIBILITY_TOL * scale).then_some(0.0);
    }

    // Columns: p (e) | q (e) | t | s (e) | artificials (n)
    let p0 = 0;
    let q0 = e;
    let t_col = 2 * e;
    let s0 = 2 * e + 1;
    let a0 = 3 * e + 1;
    let cols = a0 + n;
    let rows = n + e;
    let width = cols + 1;
    let mut data = vec![0.0; rows * width];
    let mut basis = vec![0; rows];

    for i in 0..n {
        let sign = if d[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..e {
            data[i * width + p0 + j] = sign * g[(i, j)];
            data[i * width + q0 + j] = -sign * g[(i, j)];
        }
        data[i * width + a0 + i] = 1.0;
        data[i * width + cols] = sign * d[i];
        basis[i] = a0 + i;
    }
    for j in 0..e {
        let r = n + j;
        data[r * width + p0 + j] = 1.0;
        data[r * width + q0 + j] = 1.0;
        data[r * width + t_col] = -1.0;
        data[r * width + s0 + j] = 1.0;
        basis[r] = s0 + j;
    }
    let mut tab = Tableau {
        rows,
        cols,
        data,
        basis,
    };

    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(a0) {
        *c = 1.0;
    }
    if !tab.minimize(&phase1, |_| true) {
        return None;
    }
    let residual: f64 = (0..rows)
        .filter(|&r| tab.basis[r] >= a0)
        .map(|r| tab.rhs(r).abs())
        .sum();
    if residual > FEASIBILITY_TOL * scale {
        return None;
    }

    // Drive zero-level artificials out of the basis where possible; rows that
    // cannot be cleared are redundant and keep a pinned artificial.
    for r in 0..rows {
        if tab.basis[r] < a0 {
            continue;
        }
        if let Some(pc) = (0..a0).find(|&c| !tab.basis.contains(&c) && tab.at(r, c).abs() > 1e-9) {
            tab.pivot(r, pc);
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[t_col] = 1.0;
    if !tab.minimize(&phase2, |c| c < a0) {
        return None;
    }
    let t = (0..rows).find(|&r| tab.basis[r] == t_col).map_or(0.0, |r| tab.rhs(r));
    Some(t.max(0.0))
}
