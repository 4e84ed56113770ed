//! Standard-form linear programs `opt c.x  s.t.  A x = b, x >= 0`.
//!
//! Dense two-phase simplex with Bland's pivoting rule. The box polytopes
//! are highly degenerate (targets are often vertices), and Bland's rule
//! guarantees termination there. Every answer carries a dual vector read off
//! the final tableau; it is checked for dual feasibility against the
//! original constraints and the primal/dual objective gap must stay within
//! [`DUALITY_GAP_TOL`].

use crate::error::{Error, Result};

pub(crate) const DUALITY_GAP_TOL: f64 = 1e-8;
const FEASIBILITY_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-11;
const REDUCED_COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub(crate) struct LinearProgram {
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers of the equality rows, in the caller's sense.
    #[allow(dead_code)]
    pub dual: Vec<f64>,
}

impl LinearProgram {
    pub fn new(cost: Vec<f64>) -> Self {
        Self { cost, rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn add_equality(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.cost.len());
        self.rows.push(row);
        self.rhs.push(rhs);
    }
}

/// Row-major tableau `[A | I | b]` with the artificial identity block kept
/// so that `B^-1` stays available for the dual.
struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(rows: &[Vec<f64>], rhs: &[f64], n: usize) -> Self {
        let m = rows.len();
        let width = n + m + 1;
        let mut t = vec![0.0; m * width];
        for (i, (row, &b)) in rows.iter().zip(rhs).enumerate() {
            let line = &mut t[i * width..(i + 1) * width];
            // Keep the right-hand side nonnegative so artificials start feasible.
            let s = if b < 0.0 { -1.0 } else { 1.0 };
            for (dst, &a) in line[..n].iter_mut().zip(row) {
                *dst = s * a;
            }
            line[n + i] = 1.0;
            line[width - 1] = s * b;
        }
        Self { m, n, width, t, basis: (n..n + m).collect() }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col);
        for v in &mut self.t[row * w..(row + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.t[row * w..(row + 1) * w].to_vec();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let f = self.at(i, col);
            if f != 0.0 {
                for (v, &pv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.t[i * w + col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Simplex multipliers `y = c_B B^-1`, read from the artificial block.
    fn multipliers(&self, cost: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|k| (0..self.m).map(|i| cost[self.basis[i]] * self.at(i, self.n + k)).sum())
            .collect()
    }

    /// Minimises `cost` over the current basis, entering only columns with `allowed(j)`.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let cb: Vec<f64> = self.basis.iter().map(|&b| cost[b]).collect();
            // Bland: lowest-index improving column enters.
            let entering = (0..self.n + self.m).filter(|&j| allowed(j)).find(|&j| {
                let z: f64 = (0..self.m).map(|i| cb[i] * self.at(i, j)).sum();
                cost[j] - z < -REDUCED_COST_TOL
            });
            let Some(col) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-14 || (ratio <= br + 1e-14 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = best else {
                return Err(Error::Solver("objective is unbounded".into()));
            };
            self.pivot(row, col);
        }
        Err(Error::Solver(format!("no convergence after {MAX_PIVOTS} pivots")))
    }
}

pub(crate) fn solve(lp: &LinearProgram, sense: Sense) -> Result<LpSolution> {
    let n = lp.cost.len();
    let m = lp.rows.len();
    let sign = match sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut tab = Tableau::new(&lp.rows, &lp.rhs, n);

    // Phase 1: minimise the sum of artificials.
    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|c| *c = 1.0);
    tab.optimize(&phase1, |_| true)?;
    let infeasibility: f64 = (0..m).filter(|&i| tab.basis[i] >= n).map(|i| tab.rhs(i)).sum();
    if infeasibility > FEASIBILITY_TOL {
        return Err(Error::Solver(format!("infeasible: phase-one residual {infeasibility:e}")));
    }
    // Pivot zero-level artificials out where possible; rows that cannot be
    // pivoted are linearly dependent and stay inert.
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.at(i, j).abs() > 1e-9) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase 2 on the caller's objective; artificials may not re-enter.
    let mut phase2 = vec![0.0; n + m];
    for (dst, &c) in phase2.iter_mut().zip(&lp.cost) {
        *dst = sign * c;
    }
    tab.optimize(&phase2, |j| j < n)?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i);
        }
    }
    // Undo the row sign flips, then the objective sign.
    let mut dual = tab.multipliers(&phase2);
    for (y, &b) in dual.iter_mut().zip(&lp.rhs) {
        if b < 0.0 {
            *y = -*y;
        }
        *y *= sign;
    }
    let objective: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    certify(lp, sense, &x, &dual, objective)?;
    Ok(LpSolution { x, objective, dual })
}

/// Primal feasibility, dual feasibility and a closed duality gap.
fn certify(lp: &LinearProgram, sense: Sense, x: &[f64], dual: &[f64], objective: f64) -> Result<()> {
    let residual = lp
        .rows
        .iter()
        .zip(&lp.rhs)
        .map(|(row, b)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
        .fold(0.0, f64::max);
    let most_negative = x.iter().copied().fold(0.0, f64::min);
    if residual > FEASIBILITY_TOL || most_negative < -FEASIBILITY_TOL {
        return Err(Error::Solver(format!(
            "primal point infeasible: residual {residual:e}, min entry {most_negative:e}"
        )));
    }
    for (j, &c) in lp.cost.iter().enumerate() {
        let ay: f64 = lp.rows.iter().zip(dual).map(|(row, y)| row[j] * y).sum();
        let slack = match sense {
            Sense::Minimize => c - ay,
            Sense::Maximize => ay - c,
        };
        if slack < -FEASIBILITY_TOL {
            return Err(Error::Solver(format!("dual infeasible at column {j}: slack {slack:e}")));
        }
    }
    let dual_objective: f64 = lp.rhs.iter().zip(dual).map(|(b, y)| b * y).sum();
    let gap = (objective - dual_objective).abs();
    if gap > DUALITY_GAP_TOL {
        return Err(Error::Solver(format!(
            "duality gap {gap:e} (primal {objective}, dual {dual_objective})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program_with_known_optimum() {
        // min x0 + 2 x1 + 3 x2  s.t. x0 + x1 + x2 = 1, x1 - x2 = 0.2
        let mut lp = LinearProgram::new(vec![1.0, 2.0, 3.0]);
        lp.add_equality(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_equality(vec![0.0, 1.0, -1.0], 0.2);
        let s = solve(&lp, Sense::Minimize).unwrap();
        assert!((s.objective - 1.2).abs() < 1e-12);
        let s = solve(&lp, Sense::Maximize).unwrap();
        // x1 = 0.6, x2 = 0.4
        assert!((s.objective - 2.4).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_and_duals() {
        // min x0 + x1  s.t.  -x0 + x1 = -0.5, x0 + x1 = 1 -> x = (0.75, 0.25)
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_equality(vec![-1.0, 1.0], -0.5);
        lp.add_equality(vec![1.0, 1.0], 1.0);
        let s = solve(&lp, Sense::Minimize).unwrap();
        assert!((s.x[0] - 0.75).abs() < 1e-12 && (s.x[1] - 0.25).abs() < 1e-12);
        let dual_obj = -0.5 * s.dual[0] + s.dual[1];
        assert!((dual_obj - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_program_is_reported() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_equality(vec![1.0, 1.0], -1.0);
        assert!(matches!(solve(&lp, Sense::Minimize), Err(Error::Solver(_))));
    }

    #[test]
    fn unbounded_program_is_reported() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_equality(vec![1.0, -1.0], 0.0);
        assert!(matches!(solve(&lp, Sense::Minimize), Err(Error::Solver(_))));
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut lp = LinearProgram::new(vec![1.0, -1.0]);
        lp.add_equality(vec![1.0, 1.0], 1.0);
        lp.add_equality(vec![2.0, 2.0], 2.0);
        let s = solve(&lp, Sense::Minimize).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-12);
    }
}
