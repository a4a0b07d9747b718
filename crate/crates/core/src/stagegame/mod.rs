//! Exact saddle points of finite matrix games.

pub mod simplex;

use crate::error::SolveError;
use crate::model::MarkovGame;

/// Payoff matrix, row player maximizes. Stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    payoff: Vec<f64>,
}

impl MatrixGame {
    pub fn new(rows: usize, cols: usize, payoff: Vec<f64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix game needs at least one action per player");
        assert_eq!(payoff.len(), rows * cols);
        Self { rows, cols, payoff }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let payoff = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, payoff)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols + j]
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn min_entry(&self) -> f64 {
        self.payoff.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_entry(&self) -> f64 {
        self.payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `dᵀ G e`.
    pub fn bilinear(&self, d: &[f64], e: &[f64]) -> f64 {
        (0..self.rows).map(|i| d[i] * (0..self.cols).map(|j| self.get(i, j) * e[j]).sum::<f64>()).sum()
    }

    /// Payoff of every pure row against the column mix `e`.
    pub fn row_payoffs(&self, e: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.get(i, j) * e[j]).sum()).collect()
    }

    /// Payoff of every pure column against the row mix `d`.
    pub fn col_payoffs(&self, d: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| d[i] * self.get(i, j)).sum()).collect()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self::new(self.rows, self.cols, self.payoff.iter().map(|x| x + c).collect())
    }

    /// `−Gᵀ`: the same game seen from the column player.
    pub fn negated_transpose(&self) -> Self {
        let mut p = Vec::with_capacity(self.payoff.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                p.push(-self.get(i, j));
            }
        }
        Self::new(self.cols, self.rows, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

impl GameSolution {
    /// Largest violation of the pure-strategy saddle inequalities.
    pub fn saddle_gap(&self, g: &MatrixGame) -> f64 {
        let best_row = g.row_payoffs(&self.col_strategy).into_iter().fold(f64::NEG_INFINITY, f64::max);
        let worst_col = g.col_payoffs(&self.row_strategy).into_iter().fold(f64::INFINITY, f64::min);
        (best_row - self.value).max(self.value - worst_col).max(0.0)
    }
}

fn normalize(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let n = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / n);
    }
}

/// Solves `max_d min_e dᵀGe`.
///
/// The payoff is shifted to `G̃ = G + (1 − min G)` so every entry is at least
/// one. The row player's program `min 𝟙ᵀx s.t. G̃ᵀx ≥ 𝟙, x ≥ 0` is solved
/// through its dual `max 𝟙ᵀy s.t. G̃y ≤ 𝟙, y ≥ 0`, whose slack basis is
/// feasible from the start. The column strategy is `y/𝟙ᵀy`, the row strategy
/// comes from the dual multipliers, and the shifted value is `1/𝟙ᵀy`.
pub fn solve_matrix_game(g: &MatrixGame) -> Result<GameSolution, SolveError> {
    if g.payoff.iter().any(|x| !x.is_finite()) {
        return Err(SolveError::Domain("non-finite payoff".into()));
    }
    let (m, n) = (g.rows, g.cols);
    if m == 1 || n == 1 {
        return Ok(solve_degenerate(g));
    }
    let shift = 1.0 - g.min_entry();
    let mut lp = simplex::LinearProgram::new(vec![1.0; n]);
    for i in 0..m {
        let row = (0..n).map(|j| g.get(i, j) + shift).collect();
        lp.push(row, simplex::Relation::Le, 1.0);
    }
    let sol = lp.solve().map_err(|e| SolveError::MatrixGame {
        rows: m,
        cols: n,
        payoff: g.payoff.clone(),
        source: Box::new(e),
    })?;
    let mut col_strategy = sol.x;
    let mut row_strategy = sol.duals;
    normalize(&mut col_strategy);
    normalize(&mut row_strategy);
    // Evaluate with the normalized strategies to keep value and strategies consistent.
    let value = g.bilinear(&row_strategy, &col_strategy);
    Ok(GameSolution { row_strategy, col_strategy, value, pivots: sol.pivots })
}

/// One player has a single action: the other simply best-responds.
fn solve_degenerate(g: &MatrixGame) -> GameSolution {
    let pick = |vals: &[f64], maximize: bool| {
        let mut best = 0;
        for (k, &v) in vals.iter().enumerate() {
            if (maximize && v > vals[best]) || (!maximize && v < vals[best]) {
                best = k;
            }
        }
        best
    };
    if g.rows == 1 {
        let vals: Vec<f64> = (0..g.cols).map(|j| g.get(0, j)).collect();
        let j = pick(&vals, false);
        let mut e = vec![0.0; g.cols];
        e[j] = 1.0;
        GameSolution { row_strategy: vec![1.0], col_strategy: e, value: vals[j], pivots: 0 }
    } else {
        let vals: Vec<f64> = (0..g.rows).map(|i| g.get(i, 0)).collect();
        let i = pick(&vals, true);
        let mut d = vec![0.0; g.rows];
        d[i] = 1.0;
        GameSolution { row_strategy: d, col_strategy: vec![1.0], value: vals[i], pivots: 0 }
    }
}

/// Stage game at `s`: `G[i][j] = Σ_{s'} p(s,i,j,s') (r(s,i,j,s') + γ v_{s'})`.
pub fn build_stage_game(model: &MarkovGame, v: &[f64], s: usize) -> MatrixGame {
    let st = &model.states[s];
    let payoff = st
        .entries
        .iter()
        .map(|e| e.expected_reward() + model.gamma * e.probs().iter().map(|&(t, p)| p * v[t]).sum::<f64>())
        .collect();
    MatrixGame::new(st.n_max, st.n_min, payoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_counterexample_1;
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matching_pennies() {
        let g = MatrixGame::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let s = solve_matrix_game(&g).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!(close(&s.row_strategy, &[0.5, 0.5], 1e-12));
        assert!(close(&s.col_strategy, &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn one_by_one() {
        let s = solve_matrix_game(&MatrixGame::from_rows(&[vec![3.0]])).unwrap();
        assert_eq!(s.value, 3.0);
        assert_eq!(s.row_strategy, vec![1.0]);
        assert_eq!(s.col_strategy, vec![1.0]);
    }

    #[test]
    fn pure_saddle() {
        // Support enumeration by hand: the only saddle is (row 0, col 1) with value 1.
        let g = MatrixGame::from_rows(&[vec![2.0, 1.0], vec![0.0, 0.0]]);
        let s = solve_matrix_game(&g).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(close(&s.row_strategy, &[1.0, 0.0], 1e-12));
        assert!(close(&s.col_strategy, &[0.0, 1.0], 1e-12));
    }

    #[test]
    fn rock_paper_scissors_variant() {
        let g = MatrixGame::from_rows(&[vec![0.0, 2.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]]);
        let s = solve_matrix_game(&g).unwrap();
        assert!((s.value - 1.0 / 12.0).abs() < 1e-12);
        assert!(s.saddle_gap(&g) < 1e-12);
    }

    #[test]
    fn stage_games_of_first_counterexample() {
        let m = build_counterexample_1();
        let g = build_stage_game(&m, &[0.0; 3], 0);
        assert_eq!((g.rows(), g.cols()), (1, 2));
        assert!(close(g.payoff(), &[-H, -H], 1e-15));
        let g = build_stage_game(&m, &[0.0; 3], 2);
        assert!(close(g.payoff(), &[0.5], 1e-15));
        // Independent hand evaluation: −√2/2 ± 0.6·5/4.
        let g = build_stage_game(&m, &[0.0, -1.25, 1.25], 0);
        assert!(close(g.payoff(), &[0.75 - H, -0.75 - H], 1e-15));
    }
}
