//! Dense two-phase primal simplex for the small LPs this crate solves
//! (discrete transport couplings and budgeted transport maximization).
//!
//! Pivoting uses Dantzig's rule and falls back to Bland's rule permanently
//! once a degenerate stall is detected, which guarantees termination.
//! Desk-scale instances here stay below ~10⁴ variables, so a dense tableau
//! is exact (up to float tolerance) and dependency-free.

use crate::error::{Error, Result};

/// Pivot/zero tolerance inside the tableau.
const PIVOT_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
const COST_TOL: f64 = 1e-9;
/// Phase-1 residual above which the program is declared infeasible.
const FEAS_TOL: f64 = 1e-7;
/// Consecutive non-improving pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Cmp {
    Eq,
    Le,
}

/// A linear program `min c'x  s.t.  rows, x >= 0`.
#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    n_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    cmps: Vec<Cmp>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n_vars = objective.len();
        LinearProgram {
            n_vars,
            objective,
            rows: Vec::new(),
            cmps: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::minimize(objective.into_iter().map(|c| -c).collect())
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n_vars);
        self.rows.push(coeffs);
        self.cmps.push(cmp);
        self.rhs.push(rhs);
    }

    /// Solve; `value` is the minimum of the (possibly negated) objective.
    /// Callers that built the program with [`maximize`] should negate it back.
    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::new(self).solve()
    }
}

struct Tableau {
    n_struct: usize,
    n_total: usize, // structural + slack + artificial
    n_art: usize,
    m: usize,
    /// m rows, each of length n_total + 1 (rhs last).
    rows: Vec<Vec<f64>>,
    /// Objective row (reduced costs), length n_total + 1 (negated objective value last).
    obj: Vec<f64>,
    basis: Vec<usize>,
    objective: Vec<f64>, // original structural costs
    bland: bool,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n_slack = lp.cmps.iter().filter(|c| **c == Cmp::Le).count();
        let n_struct = lp.n_vars;
        let n_art = m;
        let n_total = n_struct + n_slack + n_art;

        let mut rows = Vec::with_capacity(m);
        let mut slack_idx = n_struct;
        for i in 0..m {
            let mut row = vec![0.0; n_total + 1];
            row[..n_struct].copy_from_slice(&lp.rows[i]);
            if lp.cmps[i] == Cmp::Le {
                row[slack_idx] = 1.0;
                slack_idx += 1;
            }
            row[n_total] = lp.rhs[i];
            if row[n_total] < 0.0 {
                for v in row.iter_mut() {
                    *v = -*v;
                }
            }
            row[n_struct + n_slack + i] = 1.0; // artificial
            rows.push(row);
        }

        Tableau {
            n_struct,
            n_total,
            n_art,
            m,
            rows,
            obj: vec![0.0; n_total + 1],
            basis: (0..m).map(|i| n_struct + n_slack + i).collect(),
            objective: lp.objective.clone(),
            bland: false,
        }
    }

    fn art_start(&self) -> usize {
        self.n_total - self.n_art
    }

    /// Rebuild the objective row for the given costs and price out the basis.
    fn set_objective(&mut self, costs: &[f64]) {
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        self.obj[..costs.len()].copy_from_slice(costs);
        for (i, &b) in self.basis.iter().enumerate() {
            let c = self.obj[b];
            if c != 0.0 {
                let row = self.rows[i].clone();
                for (o, r) in self.obj.iter_mut().zip(&row) {
                    *o -= c * r;
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let factor = r[col];
            if factor != 0.0 {
                for (v, p) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                r[col] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// One simplex phase over the columns `0..col_limit`. Returns Ok(()) at
    /// optimality, Err on unboundedness or iteration blow-up.
    fn run(&mut self, col_limit: usize) -> Result<()> {
        let max_iters = 200 * (self.m + self.n_total) + 10_000;
        let mut last_obj = f64::INFINITY;
        let mut stalled = 0usize;
        for _ in 0..max_iters {
            let entering = if self.bland {
                (0..col_limit).find(|&j| self.obj[j] < -COST_TOL)
            } else {
                let mut best = None;
                let mut best_val = -COST_TOL;
                for j in 0..col_limit {
                    if self.obj[j] < best_val {
                        best_val = self.obj[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else {
                return Ok(());
            };

            // ratio test; Bland tie-break on the basic variable index
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rows[i][self.n_total] / a;
                    let better = ratio < best_ratio - PIVOT_TOL
                        || (ratio < best_ratio + PIVOT_TOL
                            && leave.is_some_and(|l| self.basis[i] < self.basis[l]));
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(row) = leave else {
                return Err(Error::numerical("simplex", "unbounded linear program"));
            };
            self.pivot(row, col);

            let cur = self.obj[self.n_total];
            if cur > last_obj - 1e-12 {
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    self.bland = true;
                }
            } else {
                stalled = 0;
            }
            last_obj = cur;
        }
        Err(Error::numerical("simplex", "iteration limit reached"))
    }

    /// Remove artificials from the basis (or drop redundant rows), then
    /// delete the artificial columns.
    fn purge_artificials(&mut self) -> Result<()> {
        let art_start = self.art_start();
        let mut i = 0;
        while i < self.m {
            if self.basis[i] >= art_start {
                let pivot_col = (0..art_start).find(|&j| self.rows[i][j].abs() > PIVOT_TOL);
                match pivot_col {
                    Some(col) => self.pivot(i, col),
                    None => {
                        // redundant constraint
                        self.rows.remove(i);
                        self.basis.remove(i);
                        self.m -= 1;
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in self.rows.iter_mut() {
            row.drain(art_start..self.n_total);
        }
        self.obj.drain(art_start..self.n_total);
        self.n_total = art_start;
        self.n_art = 0;
        Ok(())
    }

    fn solve(mut self) -> Result<LpSolution> {
        // Phase 1: minimize the sum of artificials.
        let mut phase1 = vec![0.0; self.n_total];
        for c in phase1.iter_mut().skip(self.art_start()) {
            *c = 1.0;
        }
        self.set_objective(&phase1);
        self.run(self.n_total)?;
        let residual = -self.obj[self.n_total];
        if residual > FEAS_TOL {
            return Err(Error::numerical(
                "simplex",
                format!("infeasible linear program (phase-1 residual {residual:.3e})"),
            ));
        }
        self.purge_artificials()?;

        // Phase 2: original objective.
        self.bland = false;
        let costs = self.objective.clone();
        self.set_objective(&costs);
        self.run(self.n_total)?;

        let mut x = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.rows[i][self.n_total].max(0.0);
            }
        }
        let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution { x, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> optimum 36 at (2,6)
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.add_constraint(vec![1.0, 0.0], Cmp::Le, 4.0);
        lp.add_constraint(vec![0.0, 2.0], Cmp::Le, 12.0);
        lp.add_constraint(vec![3.0, 2.0], Cmp::Le, 18.0);
        let sol = lp.solve().unwrap();
        assert!((-sol.value - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_constraints_with_redundancy() {
        // transport-like system with one redundant equality
        // min x11 + 2 x12 + 3 x21 + x22, rows: x11+x12=0.5, x21+x22=0.5,
        // cols: x11+x21=0.4, x12+x22=0.6 (sum of rows == sum of cols)
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0, 3.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0, 0.0, 0.0], Cmp::Eq, 0.5);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 1.0], Cmp::Eq, 0.5);
        lp.add_constraint(vec![1.0, 0.0, 1.0, 0.0], Cmp::Eq, 0.4);
        lp.add_constraint(vec![0.0, 1.0, 0.0, 1.0], Cmp::Eq, 0.6);
        let sol = lp.solve().unwrap();
        // optimal: x11 = 0.4, x12 = 0.1, x22 = 0.5 -> 0.4 + 0.2 + 0.5 = 1.1
        assert!((sol.value - 1.1).abs() < 1e-9);
    }

    #[test]
    fn degenerate_program_terminates() {
        // classic degenerate vertex: multiple binding constraints at origin
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Cmp::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Cmp::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Cmp::Le, 1.0);
        let sol = lp.solve().unwrap();
        assert!(
            (-sol.value - 0.05).abs() < 1e-9,
            "Beale cycling example optimum is 1/20"
        );
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::minimize(vec![1.0]);
        lp.add_constraint(vec![1.0], Cmp::Eq, 1.0);
        lp.add_constraint(vec![1.0], Cmp::Eq, 2.0);
        assert!(lp.solve().is_err());
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add_constraint(vec![0.0, 1.0], Cmp::Le, 1.0);
        assert!(lp.solve().is_err());
    }
}
