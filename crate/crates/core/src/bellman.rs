//! Bellman operators for Markov games and L1 robust MDPs.
//!
//! The equilibrium backup solves one small LP per state: the stage matrix game
//! for Markov games, and a budget-allocation LP for robust MDPs. Both return
//! the greedy policy pair alongside the new values, so the pair is always a
//! saddle point of the stage problem that produced the value.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::SolveError;
use crate::model::{MarkovGame, Model, RobustMdp, SparseRow};
use crate::stagegame::simplex::{LinearProgram, Relation};
use crate::stagegame::{build_stage_game, solve_matrix_game, MatrixGame};

/// Value function, one entry per state.
pub type ValueFunction = Vec<f64>;

/// Below this many states the per-state loop stays on the calling thread.
const PAR_THRESHOLD: usize = 32;

/// The minimizing side of a policy pair.
#[derive(Debug, Clone, PartialEq)]
pub enum MinPolicy {
    /// Markov games: a distribution over the minimizer's actions per state.
    Mixed(Vec<Vec<f64>>),
    /// Robust MDPs: per state, one transition row per action, chosen by nature.
    Kernel(Vec<Vec<SparseRow>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPair {
    pub max_policy: Vec<Vec<f64>>,
    pub min_policy: MinPolicy,
}

impl PolicyPair {
    /// Checks distributions and (for robust MDPs) budget feasibility of the kernel.
    pub fn check(&self, model: &Model) -> Result<(), String> {
        let dist_ok = |d: &[f64]| d.iter().all(|&x| x >= -1e-12) && (d.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
        let n = model.n_states();
        if self.max_policy.len() != n {
            return Err("max policy length mismatch".into());
        }
        for (s, d) in self.max_policy.iter().enumerate() {
            if d.len() != model.n_max_actions(s) || !dist_ok(d) {
                return Err(format!("max policy at state {s} is not a distribution"));
            }
        }
        match (&self.min_policy, model) {
            (MinPolicy::Mixed(sig), Model::Game(g)) => {
                for (s, d) in sig.iter().enumerate() {
                    if d.len() != g.states[s].n_min || !dist_ok(d) {
                        return Err(format!("min policy at state {s} is not a distribution"));
                    }
                }
            }
            (MinPolicy::Kernel(k), Model::Robust(r)) => {
                for (s, rows) in k.iter().enumerate() {
                    let st = &r.states[s];
                    let mut dev = 0.0;
                    for (a, row) in rows.iter().enumerate() {
                        let d: Vec<f64> = row.iter().map(|x| x.1).collect();
                        if !dist_ok(&d) {
                            return Err(format!("kernel row ({s},{a}) is not a distribution"));
                        }
                        dev += l1_distance(row, st.entries[a].nominal());
                    }
                    if dev > st.budget + 1e-9 {
                        return Err(format!("kernel at state {s} spends {dev} > budget {}", st.budget));
                    }
                }
            }
            _ => return Err("policy kind does not match model kind".into()),
        }
        Ok(())
    }
}

fn l1_distance(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let mut idx: Vec<usize> = a.iter().chain(b).map(|x| x.0).collect();
    idx.sort_unstable();
    idx.dedup();
    let get = |row: &[(usize, f64)], i| row.iter().filter(|x| x.0 == i).map(|x| x.1).sum::<f64>();
    idx.into_iter().map(|i| (get(a, i) - get(b, i)).abs()).sum()
}

#[derive(Debug, Clone)]
pub struct BackupResult {
    pub new_value: ValueFunction,
    pub policies: PolicyPair,
    /// Simplex pivots spent on this backup.
    pub pivots: usize,
}

impl BackupResult {
    pub fn residual_inf(&self, v: &[f64]) -> f64 {
        self.new_value.iter().zip(v).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn residual_l2_sq(&self, v: &[f64]) -> f64 {
        self.new_value.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Pinned minimizer choices. A pin is honoured only where it is itself an
/// optimal response of the stage game, so pinned backups remain exact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TiePins {
    pub min_pins: Vec<(usize, Vec<f64>)>,
}

impl TiePins {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn pin_min(state: usize, dist: Vec<f64>) -> Self {
        Self { min_pins: vec![(state, dist)] }
    }

    fn for_state(&self, s: usize) -> Option<&[f64]> {
        self.min_pins.iter().find(|(t, _)| *t == s).map(|(_, d)| d.as_slice())
    }
}

fn per_state<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Equilibrium backup `𝔗v` together with a greedy saddle pair from `𝔅v`.
pub fn bellman_backup(model: &Model, v: &[f64]) -> Result<BackupResult, SolveError> {
    bellman_backup_pinned(model, v, &TiePins::none())
}

pub fn bellman_backup_pinned(model: &Model, v: &[f64], pins: &TiePins) -> Result<BackupResult, SolveError> {
    assert_eq!(v.len(), model.n_states(), "value function length mismatch");
    match model {
        Model::Game(g) => game_backup(g, v, pins),
        Model::Robust(r) => robust_backup(r, v),
    }
}

fn game_backup(g: &MarkovGame, v: &[f64], pins: &TiePins) -> Result<BackupResult, SolveError> {
    let results = per_state(g.n_states(), |s| {
        let stage = build_stage_game(g, v, s);
        let mut sol = solve_matrix_game(&stage).map_err(|e| SolveError::Backup { state: s, source: Box::new(e) })?;
        if let Some(pin) = pins.for_state(s) {
            if pin_is_optimal(&stage, pin, sol.value) {
                sol.col_strategy = pin.to_vec();
                sol.value = stage.bilinear(&sol.row_strategy, pin);
            }
        }
        Ok(sol)
    });
    let mut new_value = Vec::with_capacity(v.len());
    let mut max_policy = Vec::with_capacity(v.len());
    let mut min_policy = Vec::with_capacity(v.len());
    let mut pivots = 0;
    for r in results {
        let sol = r?;
        new_value.push(sol.value);
        max_policy.push(sol.row_strategy);
        min_policy.push(sol.col_strategy);
        pivots += sol.pivots;
    }
    Ok(BackupResult { new_value, policies: PolicyPair { max_policy, min_policy: MinPolicy::Mixed(min_policy) }, pivots })
}

fn pin_is_optimal(stage: &MatrixGame, pin: &[f64], value: f64) -> bool {
    if pin.len() != stage.cols() {
        return false;
    }
    let tol = 1e-12 * (1.0 + value.abs());
    stage.row_payoffs(pin).into_iter().all(|x| x <= value + tol)
}

/// Dense per-action target values `z_a(s') = r(s,a,s') + γ v(s')`.
pub fn robust_targets(r: &RobustMdp, s: usize, v: &[f64]) -> Vec<Vec<f64>> {
    r.states[s]
        .entries
        .iter()
        .map(|e| {
            let mut z: Vec<f64> = v.iter().map(|x| r.gamma * x).collect();
            for &(t, rew) in e.rewards() {
                z[t] += rew;
            }
            z
        })
        .collect()
}

fn argmin(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in z.iter().enumerate() {
        if x < z[best] {
            best = k;
        }
    }
    best
}

/// Worst-case response of one action under an L1 budget `b`: move `b/2` mass
/// from the highest-valued states onto the lowest-valued one.
fn shift_mass(nominal: &[(usize, f64)], z: &[f64], budget: f64) -> SparseRow {
    let target = argmin(z);
    let mut row: SparseRow = nominal.to_vec();
    if !row.iter().any(|x| x.0 == target) {
        row.push((target, 0.0));
    }
    let mut order: Vec<usize> = (0..row.len()).filter(|&k| row[k].0 != target).collect();
    order.sort_by(|&i, &j| z[row[j].0].total_cmp(&z[row[i].0]).then(row[i].0.cmp(&row[j].0)));
    let mut mass = (budget / 2.0).max(0.0);
    let tpos = row.iter().position(|x| x.0 == target).expect("target present");
    for k in order {
        if mass <= 0.0 {
            break;
        }
        let take = mass.min(row[k].1);
        row[k].1 -= take;
        row[tpos].1 += take;
        mass -= take;
    }
    row.retain(|x| x.1 > 0.0);
    row.sort_by_key(|x| x.0);
    row
}

/// Affine pieces `(slope, intercept)` whose pointwise max is the convex,
/// nonincreasing worst-case value of one action as a function of its budget.
fn budget_curve(nominal: &[(usize, f64)], z: &[f64]) -> Vec<(f64, f64)> {
    let zmin = z[argmin(z)];
    let mut support: Vec<(f64, f64)> = nominal.iter().map(|&(t, p)| (z[t], p)).filter(|x| x.1 > 0.0).collect();
    support.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut pieces = Vec::new();
    let mut b0 = 0.0;
    let mut q0: f64 = nominal.iter().map(|&(t, p)| p * z[t]).sum();
    for (zj, pj) in support {
        if zj <= zmin {
            break;
        }
        let slope = -(zj - zmin) / 2.0;
        pieces.push((slope, q0 - slope * b0));
        b0 += 2.0 * pj;
        q0 += slope * 2.0 * pj;
    }
    pieces.push((0.0, zmin));
    pieces
}

fn robust_backup(r: &RobustMdp, v: &[f64]) -> Result<BackupResult, SolveError> {
    let results = per_state(r.n_states(), |s| {
        robust_state_backup(r, s, v).map_err(|e| SolveError::Backup { state: s, source: Box::new(e) })
    });
    let mut new_value = Vec::with_capacity(v.len());
    let mut max_policy = Vec::with_capacity(v.len());
    let mut kernel = Vec::with_capacity(v.len());
    let mut pivots = 0;
    for res in results {
        let (value, pi, k, p) = res?;
        new_value.push(value);
        max_policy.push(pi);
        kernel.push(k);
        pivots += p;
    }
    Ok(BackupResult { new_value, policies: PolicyPair { max_policy, min_policy: MinPolicy::Kernel(kernel) }, pivots })
}

/// Robust stage problem at one state.
///
/// Nature's side is `min_{b ≥ 0, Σ b_a ≤ ξ} max_a q_a(b_a)` where `q_a` is the
/// worst-case value of action `a` under budget `b_a`. Written as an LP over
/// `(b, τ)` with one epigraph row per affine piece of each `q_a`, the optimal
/// row multipliers aggregate per action into the maximizer's policy.
fn robust_state_backup(
    r: &RobustMdp,
    s: usize,
    v: &[f64],
) -> Result<(f64, Vec<f64>, Vec<SparseRow>, usize), SolveError> {
    let st = &r.states[s];
    let na = st.n_actions();
    let z = robust_targets(r, s, v);
    let curves: Vec<Vec<(f64, f64)>> = st.entries.iter().zip(&z).map(|(e, za)| budget_curve(e.nominal(), za)).collect();

    if na == 1 {
        let k = shift_mass(st.entries[0].nominal(), &z[0], st.budget);
        let val = k.iter().map(|&(t, p)| p * z[0][t]).sum();
        return Ok((val, vec![1.0], vec![k], 0));
    }

    let floor = curves.iter().flatten().map(|x| x.1).fold(f64::INFINITY, f64::min).min(0.0);
    let shift = 1.0 - floor;
    // Variables: b_0..b_{na-1}, τ. Maximize −τ.
    let nv = na + 1;
    let mut obj = vec![0.0; nv];
    obj[na] = -1.0;
    let mut lp = LinearProgram::new(obj);
    let mut owner = Vec::new();
    for (a, curve) in curves.iter().enumerate() {
        for &(slope, icpt) in curve {
            let mut row = vec![0.0; nv];
            row[a] = -slope;
            row[na] = 1.0;
            lp.push(row, Relation::Ge, icpt + shift);
            owner.push(a);
        }
    }
    let mut budget_row = vec![1.0; nv];
    budget_row[na] = 0.0;
    lp.push(budget_row, Relation::Le, st.budget);
    let sol = lp.solve()?;

    let mut pi = vec![0.0; na];
    for (k, &a) in owner.iter().enumerate() {
        pi[a] += (-sol.duals[k]).max(0.0);
    }
    let total: f64 = pi.iter().sum();
    if total > 0.0 {
        pi.iter_mut().for_each(|x| *x /= total);
    } else {
        pi = vec![1.0 / na as f64; na];
    }
    // Rescale budgets if roundoff pushed them past ξ.
    let mut b: Vec<f64> = sol.x[..na].iter().map(|x| x.max(0.0)).collect();
    let spent: f64 = b.iter().sum();
    if spent > st.budget && spent > 0.0 {
        let f = st.budget / spent;
        b.iter_mut().for_each(|x| *x *= f);
    }
    let kernel: Vec<SparseRow> =
        st.entries.iter().zip(&z).zip(&b).map(|((e, za), &ba)| shift_mass(e.nominal(), za, ba)).collect();
    let value = kernel
        .iter()
        .zip(&z)
        .zip(&pi)
        .map(|((row, za), &w)| w * row.iter().map(|&(t, p)| p * za[t]).sum::<f64>())
        .sum();
    Ok((value, pi, kernel, sol.pivots))
}

/// `min Σ_a π_a p_aᵀ z_a` over kernels in the L1 budget set of state `s`.
///
/// Moving mass from `s'` to the argmin of `z_a` pays `π_a (z_a(s') − min z_a)`
/// per unit and costs two units of budget, so the problem is a fractional
/// knapsack over (action, state) pieces.
pub fn robust_inner_min(r: &RobustMdp, s: usize, pi: &[f64], z: &[Vec<f64>]) -> (Vec<SparseRow>, f64) {
    let st = &r.states[s];
    let mut pieces: Vec<(f64, usize, usize, f64)> = Vec::new(); // (rate, a, s', capacity)
    for (a, e) in st.entries.iter().enumerate() {
        if pi[a] <= 0.0 {
            continue;
        }
        let zmin = z[a][argmin(&z[a])];
        for &(t, p) in e.nominal() {
            let gain = pi[a] * (z[a][t] - zmin);
            if gain > 0.0 && p > 0.0 {
                pieces.push((gain / 2.0, a, t, 2.0 * p));
            }
        }
    }
    pieces.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut alloc = vec![0.0; st.n_actions()];
    let mut left = st.budget;
    for (_, a, _, cap) in pieces {
        if left <= 0.0 {
            break;
        }
        let take = cap.min(left);
        alloc[a] += take;
        left -= take;
    }
    let kernel: Vec<SparseRow> = st
        .entries
        .iter()
        .enumerate()
        .map(|(a, e)| if pi[a] > 0.0 { shift_mass(e.nominal(), &z[a], alloc[a]) } else { e.nominal().to_vec() })
        .collect();
    let value = kernel
        .iter()
        .enumerate()
        .map(|(a, row)| pi[a] * row.iter().map(|&(t, p)| p * z[a][t]).sum::<f64>())
        .sum();
    (kernel, value)
}

/// `𝔗^{π,σ} v = r^{π,σ} + γ P^{π,σ} v`.
pub fn apply_policy_operator(model: &Model, policies: &PolicyPair, v: &[f64]) -> ValueFunction {
    let n = model.n_states();
    let (r, rows) = policy_chain(model, policies);
    let gamma = model.gamma();
    (0..n).map(|s| r[s] + gamma * rows[s].iter().map(|&(t, p)| p * v[t]).sum::<f64>()).collect()
}

/// Reward vector and sparse transition rows of the Markov chain induced by a policy pair.
pub fn policy_chain(model: &Model, policies: &PolicyPair) -> (Vec<f64>, Vec<SparseRow>) {
    let n = model.n_states();
    let mut rewards = vec![0.0; n];
    let mut rows = Vec::with_capacity(n);
    let mut acc = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let add = |acc: &mut Vec<f64>, touched: &mut Vec<usize>, t: usize, w: f64| {
        if acc[t] == 0.0 {
            touched.push(t);
        }
        acc[t] += w;
    };
    for s in 0..n {
        touched.clear();
        match (model, &policies.min_policy) {
            (Model::Game(g), MinPolicy::Mixed(sig)) => {
                let st = &g.states[s];
                for a in 0..st.n_max {
                    let pa = policies.max_policy[s][a];
                    if pa == 0.0 {
                        continue;
                    }
                    for b in 0..st.n_min {
                        let w = pa * sig[s][b];
                        if w == 0.0 {
                            continue;
                        }
                        let e = st.entry(a, b);
                        rewards[s] += w * e.expected_reward();
                        for &(t, p) in e.probs() {
                            add(&mut acc, &mut touched, t, w * p);
                        }
                    }
                }
            }
            (Model::Robust(r), MinPolicy::Kernel(k)) => {
                let st = &r.states[s];
                for (a, e) in st.entries.iter().enumerate() {
                    let pa = policies.max_policy[s][a];
                    if pa == 0.0 {
                        continue;
                    }
                    for &(t, p) in &k[s][a] {
                        rewards[s] += pa * p * e.reward_to(t);
                        add(&mut acc, &mut touched, t, pa * p);
                    }
                }
            }
            _ => panic!("policy kind does not match model kind"),
        }
        touched.sort_unstable();
        let row: SparseRow = touched.iter().map(|&t| (t, acc[t])).collect();
        for &t in &touched {
            acc[t] = 0.0;
        }
        rows.push(row);
    }
    (rewards, rows)
}

/// Solves `(I − γP) v = r` for a reward vector and sparse chain.
pub fn solve_chain(gamma: f64, rewards: &[f64], rows: &[SparseRow]) -> Result<ValueFunction, SolveError> {
    let n = rewards.len();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (s, row) in rows.iter().enumerate() {
        for &(t, p) in row {
            m[(s, t)] -= gamma * p;
        }
    }
    let rhs = DVector::from_column_slice(rewards);
    let x = m.lu().solve(&rhs).ok_or(SolveError::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolveError::SingularSystem);
    }
    Ok(x.iter().copied().collect())
}

/// `v^{π,σ}`: the fixed point of `𝔗^{π,σ}`, by LU on `(I − γP^{π,σ}) v = r^{π,σ}`.
pub fn evaluate_policies(model: &Model, policies: &PolicyPair) -> Result<ValueFunction, SolveError> {
    let (r, rows) = policy_chain(model, policies);
    solve_chain(model.gamma(), &r, &rows)
}

pub fn residual_inf(model: &Model, v: &[f64]) -> Result<f64, SolveError> {
    Ok(bellman_backup(model, v)?.residual_inf(v))
}

pub fn residual_l2_sq(model: &Model, v: &[f64]) -> Result<f64, SolveError> {
    Ok(bellman_backup(model, v)?.residual_l2_sq(v))
}

/// Both residual norms from one backup.
pub fn residuals(model: &Model, v: &[f64]) -> Result<(f64, f64), SolveError> {
    let b = bellman_backup(model, v)?;
    Ok((b.residual_inf(v), b.residual_l2_sq(v)))
}

/// Minimizer's best response to a fixed maximizer policy: `𝔗^{π,⋆} v` and a minimizing selector.
pub fn min_response_backup(model: &Model, max_policy: &[Vec<f64>], v: &[f64]) -> (ValueFunction, MinPolicy) {
    let n = model.n_states();
    match model {
        Model::Game(g) => {
            let out = per_state(n, |s| {
                let stage = build_stage_game(g, v, s);
                let cols = stage.col_payoffs(&max_policy[s]);
                let j = argmin(&cols);
                let mut e = vec![0.0; stage.cols()];
                e[j] = 1.0;
                (cols[j], e)
            });
            let (vals, sig): (Vec<f64>, Vec<Vec<f64>>) = out.into_iter().unzip();
            (vals, MinPolicy::Mixed(sig))
        }
        Model::Robust(r) => {
            let out = per_state(n, |s| {
                let z = robust_targets(r, s, v);
                let (k, val) = robust_inner_min(r, s, &max_policy[s], &z);
                (val, k)
            });
            let (vals, ker): (Vec<f64>, Vec<Vec<SparseRow>>) = out.into_iter().unzip();
            (vals, MinPolicy::Kernel(ker))
        }
    }
}

/// Maximizer's best response to a fixed minimizer: `𝔗^{⋆,σ} v` and a pure maximizing policy.
pub fn max_response_backup(model: &Model, min_policy: &MinPolicy, v: &[f64]) -> (ValueFunction, Vec<Vec<f64>>) {
    let n = model.n_states();
    let out = per_state(n, |s| {
        let payoffs: Vec<f64> = match (model, min_policy) {
            (Model::Game(g), MinPolicy::Mixed(sig)) => build_stage_game(g, v, s).row_payoffs(&sig[s]),
            (Model::Robust(r), MinPolicy::Kernel(k)) => r.states[s]
                .entries
                .iter()
                .enumerate()
                .map(|(a, e)| k[s][a].iter().map(|&(t, p)| p * (e.reward_to(t) + r.gamma * v[t])).sum())
                .collect(),
            _ => panic!("policy kind does not match model kind"),
        };
        let mut i = 0;
        for (k, &x) in payoffs.iter().enumerate() {
            if x > payoffs[i] {
                i = k;
            }
        }
        let mut d = vec![0.0; payoffs.len()];
        d[i] = 1.0;
        (payoffs[i], d)
    });
    out.into_iter().unzip()
}
