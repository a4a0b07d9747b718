//! Dense two-phase tableau simplex.
//!
//! Solves `maximize cᵀx` subject to linear rows (`≤`, `≥`, `=`) and `x ≥ 0`.
//! Pivoting uses Dantzig's rule and switches to Bland's rule once the pivot
//! count passes `10 · (rows + cols)`, which rules out cycling on degenerate
//! problems. Dual values are recovered from the columns that formed the
//! initial identity basis, so every row gets a multiplier.

use crate::error::SolveError;

const PIVOT_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Multipliers `y = c_B B⁻¹` expressed for the rows as written. For a
    /// maximization, `≤` rows have `y ≥ 0` and `≥` rows have `y ≤ 0`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { objective, constraints: Vec::new() }
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.objective.len());
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution, SolveError> {
        Tableau::build(self).run()
    }
}

struct Tableau {
    m: usize,
    n_struct: usize,
    width: usize,
    // m rows of `width` coefficients followed by the rhs
    t: Vec<f64>,
    basis: Vec<usize>,
    identity_col: Vec<usize>,
    row_sign: Vec<f64>,
    artificial: Vec<bool>,
    cost: Vec<f64>,
    pivots: usize,
    bland_after: usize,
    cap: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n = lp.objective.len();
        // After flipping rows to get rhs ≥ 0, count slack/surplus and artificial columns.
        let mut flipped = Vec::with_capacity(m);
        for c in &lp.constraints {
            let flip = c.rhs < 0.0;
            let rel = match (c.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            flipped.push((flip, rel));
        }
        let n_slack = flipped.iter().filter(|(_, r)| *r != Relation::Eq).count();
        let n_art = flipped.iter().filter(|(_, r)| *r != Relation::Le).count();
        let width = n + n_slack + n_art;
        let stride = width + 1;
        let mut t = vec![0.0; m * stride];
        let mut basis = vec![0; m];
        let mut identity_col = vec![0; m];
        let mut row_sign = vec![1.0; m];
        let mut artificial = vec![false; width];
        let mut next_slack = n;
        let mut next_art = n + n_slack;
        for (i, (c, &(flip, rel))) in lp.constraints.iter().zip(&flipped).enumerate() {
            let sign = if flip { -1.0 } else { 1.0 };
            row_sign[i] = sign;
            let row = &mut t[i * stride..(i + 1) * stride];
            for (j, &a) in c.coeffs.iter().enumerate() {
                row[j] = sign * a;
            }
            row[width] = sign * c.rhs;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    identity_col[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    artificial[next_art] = true;
                    basis[i] = next_art;
                    identity_col[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    artificial[next_art] = true;
                    basis[i] = next_art;
                    identity_col[i] = next_art;
                    next_art += 1;
                }
            }
        }
        let mut cost = vec![0.0; width];
        cost[..n].copy_from_slice(&lp.objective);
        let dim = m + width;
        Self {
            m,
            n_struct: n,
            width,
            t,
            basis,
            identity_col,
            row_sign,
            artificial,
            cost,
            pivots: 0,
            bland_after: 10 * dim,
            cap: 200 * dim + 1000,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.width + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.t[i * (self.width + 1) + self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let stride = self.width + 1;
        let p = self.t[r * stride + c];
        for v in &mut self.t[r * stride..(r + 1) * stride] {
            *v /= p;
        }
        let (before, rest) = self.t.split_at_mut(r * stride);
        let (prow, after) = rest.split_at_mut(stride);
        for row in before.chunks_exact_mut(stride).chain(after.chunks_exact_mut(stride)) {
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced costs `c_j − c_B B⁻¹ A_j` for the given cost vector.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * (self.width + 1)..i * (self.width + 1) + self.width];
                for (r, &a) in rc.iter_mut().zip(row) {
                    *r -= cb * a;
                }
            }
        }
        rc
    }

    /// Runs primal simplex for `cost` (maximize). Columns with `allowed[j] == false`
    /// never enter the basis.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), SolveError> {
        loop {
            if self.pivots > self.cap {
                return Err(SolveError::LpIterationCap { pivots: self.pivots });
            }
            let rc = self.reduced_costs(cost);
            let bland = self.pivots >= self.bland_after;
            let mut enter = None;
            let mut best = PIVOT_TOL;
            for j in 0..self.width {
                if !allowed[j] || rc[j] <= PIVOT_TOL {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if rc[j] > best {
                    best = rc[j];
                    enter = Some(j);
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else { return Err(SolveError::LpUnbounded) };
            self.pivot(r, c);
        }
    }

    fn run(mut self) -> Result<LpSolution, SolveError> {
        let all_real: Vec<bool> = self.artificial.iter().map(|a| !a).collect();
        if self.artificial.iter().any(|&a| a) {
            let phase1: Vec<f64> = self.artificial.iter().map(|&a| if a { -1.0 } else { 0.0 }).collect();
            let everything = vec![true; self.width];
            self.optimize(&phase1, &everything)?;
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.artificial[self.basis[i]])
                .map(|i| self.rhs(i))
                .sum();
            if infeas > FEAS_TOL {
                return Err(SolveError::LpInfeasible { residual: infeas });
            }
            // Drive zero-level artificials out of the basis where possible.
            for i in 0..self.m {
                if self.artificial[self.basis[i]] {
                    if let Some(j) = (0..self.width).find(|&j| all_real[j] && self.at(i, j).abs() > 1e-9) {
                        self.pivot(i, j);
                    }
                }
            }
        }
        let cost = self.cost.clone();
        self.optimize(&cost, &all_real)?;

        let mut x = vec![0.0; self.n_struct];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n_struct {
                x[b] = self.rhs(i).max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        let duals = (0..self.m)
            .map(|k| {
                let col = self.identity_col[k];
                let y: f64 = (0..self.m).map(|i| self.cost[self.basis[i]] * self.at(i, col)).sum();
                y * self.row_sign[k]
            })
            .collect();
        Ok(LpSolution { x, duals, objective, pivots: self.pivots })
    }
}
