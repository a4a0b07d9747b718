#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_core::model::{GameEntry, GameState, MarkovGame, RobustEntry, RobustMdp, RobustState};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting. `None` unless the system has a unique solution.
pub fn solve_unique(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    let m = a.len();
    let mut row = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        let best = (row..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[best][col].abs() < 1e-12 {
            return None;
        }
        a.swap(row, best);
        b.swap(row, best);
        for i in 0..m {
            if i != row {
                let f = a[i][col] / a[row][col];
                if f != 0.0 {
                    for k in col..n {
                        a[i][k] -= f * a[row][k];
                    }
                    b[i] -= f * b[row];
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == m && col + 1 < n {
            return None;
        }
    }
    for i in row..m {
        if b[i].abs() > 1e-9 {
            return None;
        }
    }
    let mut x = vec![0.0; n];
    for (r, &c) in pivots.iter().enumerate() {
        x[c] = b[r] / a[r][c];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n)).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

/// Value of `max_d min_e dᵀGe` by enumerating square supports (Shapley–Snow).
pub fn matrix_game_value(g: &[Vec<f64>]) -> f64 {
    let (rows, cols) = (g.len(), g[0].len());
    let tol = 1e-9;
    for k in 1..=rows.min(cols) {
        for ri in subsets(rows, k) {
            for ci in subsets(cols, k) {
                // Column mix y on ci equalizing the rows in ri: G[ri,ci] y = v, Σy = 1.
                let mut a = Vec::new();
                let mut b = Vec::new();
                for &i in &ri {
                    let mut r: Vec<f64> = ci.iter().map(|&j| g[i][j]).collect();
                    r.push(-1.0);
                    a.push(r);
                    b.push(0.0);
                }
                let mut r = vec![1.0; k];
                r.push(0.0);
                a.push(r);
                b.push(1.0);
                let Some(ys) = solve_unique(a, b, k + 1) else { continue };
                let mut a = Vec::new();
                let mut b = Vec::new();
                for &j in &ci {
                    let mut r: Vec<f64> = ri.iter().map(|&i| g[i][j]).collect();
                    r.push(-1.0);
                    a.push(r);
                    b.push(0.0);
                }
                let mut r = vec![1.0; k];
                r.push(0.0);
                a.push(r);
                b.push(1.0);
                let Some(xs) = solve_unique(a, b, k + 1) else { continue };
                if ys[..k].iter().chain(&xs[..k]).any(|&p| p < -tol) {
                    continue;
                }
                let v = ys[k];
                let mut e = vec![0.0; cols];
                for (t, &j) in ci.iter().enumerate() {
                    e[j] = ys[t];
                }
                let mut d = vec![0.0; rows];
                for (t, &i) in ri.iter().enumerate() {
                    d[i] = xs[t];
                }
                let row_ok = (0..rows).all(|i| (0..cols).map(|j| g[i][j] * e[j]).sum::<f64>() <= v + tol);
                let col_ok = (0..cols).all(|j| (0..rows).map(|i| d[i] * g[i][j]).sum::<f64>() >= v - tol);
                if row_ok && col_ok {
                    return v;
                }
            }
        }
    }
    panic!("no equilibrium found for {g:?}");
}

/// Candidate points of the s-rectangular L1 polytope around `nominal`
/// (`nominal[a]` is a dense row) that include all of its vertices.
///
/// Every coordinate is fixed at 0, fixed at its nominal value, or free; the
/// free ones are pinned down by the row sums and, optionally, one facet
/// `Σ σ_i (p_i − p̄_i) = ξ` of the budget constraint.
pub fn l1_polytope_points(nominal: &[Vec<f64>], xi: f64) -> Vec<Vec<Vec<f64>>> {
    let na = nominal.len();
    let ns = nominal[0].len();
    let n = na * ns;
    let flat: Vec<f64> = nominal.iter().flatten().copied().collect();
    let mut out = Vec::new();
    let mut pattern = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == 2).collect();
        let nf = free.len();
        let signs: Vec<Option<Vec<f64>>> = if nf == 0 {
            vec![None]
        } else {
            let mut v = vec![None];
            for m in 0u32..(1 << nf) {
                v.push(Some((0..nf).map(|t| if m >> t & 1 == 1 { 1.0 } else { -1.0 }).collect()));
            }
            v
        };
        for sg in signs {
            let mut fixed = vec![0.0; n];
            for i in 0..n {
                fixed[i] = if pattern[i] == 1 { flat[i] } else { 0.0 };
            }
            let mut a = Vec::new();
            let mut b = Vec::new();
            for act in 0..na {
                let row: Vec<f64> = free.iter().map(|&i| if i / ns == act { 1.0 } else { 0.0 }).collect();
                let rest: f64 = (act * ns..(act + 1) * ns).filter(|&i| pattern[i] != 2).map(|i| fixed[i]).sum();
                a.push(row);
                b.push(1.0 - rest);
            }
            if let Some(s) = &sg {
                // Zeroed coordinates contribute p̄_i; nominal ones contribute 0.
                let zeros: f64 = (0..n).filter(|&i| pattern[i] == 0).map(|i| flat[i]).sum();
                a.push(s.clone());
                b.push(xi - zeros + free.iter().zip(s).map(|(&i, si)| si * flat[i]).sum::<f64>());
            }
            let sol = if nf == 0 {
                if b.iter().all(|x| x.abs() < 1e-9) {
                    Some(vec![])
                } else {
                    None
                }
            } else {
                solve_unique(a, b, nf)
            };
            let Some(x) = sol else { continue };
            let mut p = fixed.clone();
            for (t, &i) in free.iter().enumerate() {
                p[i] = x[t];
            }
            if p.iter().any(|&v| v < -1e-12) {
                continue;
            }
            if let Some(s) = &sg {
                if free.iter().zip(s).any(|(&i, si)| si * (p[i] - flat[i]) < -1e-12) {
                    continue;
                }
            }
            let dev: f64 = p.iter().zip(&flat).map(|(x, y)| (x - y).abs()).sum();
            if dev > xi + 1e-9 {
                continue;
            }
            out.push((0..na).map(|act| p[act * ns..(act + 1) * ns].to_vec()).collect());
        }
        // Next pattern in base 3.
        let mut i = 0;
        while i < n && pattern[i] == 2 {
            pattern[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
        pattern[i] += 1;
    }
    out
}

/// `max_{π∈Δ^A} min_{p} Σ_a π_a p_aᵀz_a` over the L1 polytope, for `A ≤ 2`.
pub fn robust_state_value(nominal: &[Vec<f64>], xi: f64, z: &[Vec<f64>]) -> f64 {
    let pts = l1_polytope_points(nominal, xi);
    assert!(!pts.is_empty());
    let lines: Vec<Vec<f64>> =
        pts.iter().map(|p| p.iter().zip(z).map(|(pa, za)| pa.iter().zip(za).map(|(x, y)| x * y).sum()).collect()).collect();
    match nominal.len() {
        1 => lines.iter().map(|l| l[0]).fold(f64::INFINITY, f64::min),
        2 => {
            // π = (t, 1−t); each point gives the line t·c0 + (1−t)·c1.
            let f = |t: f64| lines.iter().map(|l| t * l[0] + (1.0 - t) * l[1]).fold(f64::INFINITY, f64::min);
            let mut cands = vec![0.0, 1.0];
            for i in 0..lines.len() {
                for j in i + 1..lines.len() {
                    let (a0, a1) = (lines[i][0] - lines[i][1], lines[i][1]);
                    let (b0, b1) = (lines[j][0] - lines[j][1], lines[j][1]);
                    if (a0 - b0).abs() > 1e-15 {
                        let t = (b1 - a1) / (a0 - b0);
                        if (0.0..=1.0).contains(&t) {
                            cands.push(t);
                        }
                    }
                }
            }
            cands.into_iter().map(f).fold(f64::NEG_INFINITY, f64::max)
        }
        _ => unimplemented!("oracle handles at most two actions"),
    }
}

pub fn random_dist(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| if sparse && rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) }).collect();
    if w.iter().sum::<f64>() == 0.0 {
        w[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

pub fn sparse(d: &[f64]) -> Vec<(usize, f64)> {
    d.iter().enumerate().filter(|x| *x.1 > 0.0).map(|(i, &p)| (i, p)).collect()
}

pub fn random_game(rng: &mut ChaCha8Rng, max_s: usize, max_a: usize) -> MarkovGame {
    let n = rng.random_range(1..=max_s);
    let states = (0..n)
        .map(|_| {
            let n_max = rng.random_range(1..=max_a);
            let n_min = rng.random_range(1..=max_a);
            let entries = (0..n_max * n_min)
                .map(|_| {
                    let p = sparse(&random_dist(rng, n, true));
                    let r = p.iter().map(|&(t, _)| (t, rng.random_range(-1.0..1.0))).collect();
                    GameEntry::new(p, r)
                })
                .collect();
            GameState { n_max, n_min, entries }
        })
        .collect();
    MarkovGame { gamma: rng.random_range(0.3..0.95), initial_state: 0, states }
}

pub fn random_rmdp(rng: &mut ChaCha8Rng, max_s: usize, max_a: usize) -> RobustMdp {
    let n = rng.random_range(1..=max_s);
    let states = (0..n)
        .map(|_| {
            let na = rng.random_range(1..=max_a);
            let entries = (0..na)
                .map(|_| {
                    let p = sparse(&random_dist(rng, n, true));
                    let r = (0..n).map(|t| (t, rng.random_range(-1.0..1.0))).collect();
                    RobustEntry::new(p, r)
                })
                .collect();
            RobustState { budget: rng.random_range(0.0..=2.0 * na as f64), entries }
        })
        .collect();
    RobustMdp { gamma: rng.random_range(0.3..0.95), initial_state: 0, states }
}
