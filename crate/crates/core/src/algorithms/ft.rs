use super::{Run, SolveReport, SolverConfig, StepKind, Termination};
use crate::bellman::{bellman_backup_pinned, evaluate_policies, policy_chain, BackupResult};
use crate::error::SolveError;
use crate::model::Model;

/// Newton direction `d = v^{π,σ} − v` for the greedy pair in `b`, and the
/// gradient `g = 2(γP^{π,σ} − I)ᵀ(𝔗v − v)` of `ψ₂(v)²`.
pub fn ft_direction(model: &Model, v: &[f64], b: &BackupResult) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let u = evaluate_policies(model, &b.policies)?;
    let d: Vec<f64> = u.iter().zip(v).map(|(a, x)| a - x).collect();
    let res: Vec<f64> = b.new_value.iter().zip(v).map(|(a, x)| a - x).collect();
    let (_, rows) = policy_chain(model, &b.policies);
    let gamma = model.gamma();
    let mut g: Vec<f64> = res.iter().map(|r| -2.0 * r).collect();
    for (s, row) in rows.iter().enumerate() {
        for &(t, p) in row {
            g[t] += 2.0 * gamma * p * res[s];
        }
    }
    Ok((d, g))
}

#[derive(Debug, Clone)]
pub struct LineSearch {
    /// Accepted exponent `i` and the new iterate with its backup.
    pub accepted: Option<(u32, Vec<f64>, BackupResult)>,
    /// Backups spent on trial points.
    pub trials: usize,
}

/// Armijo backtracking on `ψ₂²` along `d`: the least `i ≤ armijo_max_i` with
/// `ψ₂(v+βⁱd)² ≤ ψ₂(v)² + c_A βⁱ dᵀg` and a strict decrease.
pub fn ft_line_search(
    model: &Model,
    config: &SolverConfig,
    v: &[f64],
    psi2_sq: f64,
    d: &[f64],
    g: &[f64],
) -> Result<LineSearch, SolveError> {
    let slope: f64 = d.iter().zip(g).map(|(a, b)| a * b).sum();
    let mut trials = 0;
    for i in 0..=config.armijo_max_i {
        let alpha = config.armijo_beta.powi(i as i32);
        let w: Vec<f64> = v.iter().zip(d).map(|(x, y)| x + alpha * y).collect();
        let bw = bellman_backup_pinned(model, &w, &config.pins)?;
        trials += 1;
        let next = bw.residual_l2_sq(&w);
        if next <= psi2_sq + config.armijo_coeff * alpha * slope && next < psi2_sq {
            return Ok(LineSearch { accepted: Some((i, w, bw)), trials });
        }
    }
    Ok(LineSearch { accepted: None, trials })
}

/// Newton steps on `ψ₂²` safeguarded by an Armijo line search.
pub fn run_ft(model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
    let mut run = Run::new("ft", model, config)?;
    let mut v = v0.to_vec();
    let mut b = run.backup(&v)?;
    let mut kind = StepKind::Initial;
    let mut k = 0;
    loop {
        let psi = run.record(k, &v, &b, kind);
        if run.certified(psi) {
            return Ok(run.finish(v, b, psi, k, Termination::Converged));
        }
        if let Some(t) = run.cap(k) {
            return Ok(run.finish(v, b, psi, k, t));
        }
        let (d, g) = ft_direction(model, &v, &b)?;
        run.evaluations += 1;
        let ls = ft_line_search(model, config, &v, b.residual_l2_sq(&v), &d, &g)?;
        run.backups += ls.trials;
        match ls.accepted {
            Some((i, w, bw)) => {
                v = w;
                b = bw;
                kind = StepKind::LineSearch { exponent: i };
                k += 1;
            }
            None => return Ok(run.finish(v, b, psi, k + 1, Termination::NoDescentStep)),
        }
    }
}
