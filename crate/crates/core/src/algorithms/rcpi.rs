use super::{Run, SolveReport, SolverConfig, StepKind, Termination};
use crate::error::SolveError;
use crate::model::Model;

/// Largest backup tolerance for which RCPI is guaranteed to reach `epsilon`:
/// `ε(1−γ)²/(2γ(3+γ))`.
pub fn rcpi_delta_limit(gamma: f64, epsilon: f64) -> f64 {
    epsilon * (1.0 - gamma).powi(2) / (2.0 * gamma * (3.0 + gamma))
}

/// Repair backups tried when `m` is unbounded before giving up on an evaluation.
const UNBOUNDED_RECOVERY_CAP: usize = 10_000;

/// Policy iteration that accepts an evaluation only when its residual contracts.
///
/// An evaluation `u` of the greedy pair is tried when
/// `γ^{m−1}ψ(u) + 2(1+γ)δ/(1−γ) ≤ ψ(v)`; it is then repaired by up to `m`
/// backups until `ψ(u) ≤ γψ(v) + 2(1+γ)δ`. Otherwise the step is a plain backup.
pub fn run_rcpi(model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
    let gamma = model.gamma();
    let limit = rcpi_delta_limit(gamma, config.epsilon);
    if !(config.delta < limit) {
        return Err(SolveError::Config(format!(
            "delta {:e} must be below {limit:e} for gamma {gamma} and epsilon {:e}",
            config.delta, config.epsilon
        )));
    }
    let mut run = Run::new(if config.m == Some(0) { "rcpi0" } else { "rcpi" }, model, config)?;
    let slack = 2.0 * (1.0 + gamma) * config.delta;
    let guard_power = match config.m {
        None => 0.0,
        Some(m) => gamma.powi(m as i32 - 1),
    };
    let max_recoveries = config.m.unwrap_or(UNBOUNDED_RECOVERY_CAP);

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
        let mut u = run.evaluate(&b.policies)?;
        let mut bu = run.backup(&u)?;
        let mut psi_u = bu.residual_inf(&u);
        let mut accepted = None;
        if guard_power * psi_u + slack / (1.0 - gamma) <= psi {
            let target = gamma * psi + slack;
            let mut l = 0;
            while psi_u > target && l < max_recoveries {
                u = std::mem::take(&mut bu.new_value);
                bu = run.backup(&u)?;
                psi_u = bu.residual_inf(&u);
                l += 1;
            }
            if psi_u <= target {
                accepted = Some(l);
            }
        }
        match accepted {
            Some(l) => {
                v = u;
                b = bu;
                kind = StepKind::Evaluation { recoveries: l };
            }
            None => {
                v = std::mem::take(&mut b.new_value);
                b = run.backup(&v)?;
                kind = StepKind::Fallback;
            }
        }
        k += 1;
    }
}
