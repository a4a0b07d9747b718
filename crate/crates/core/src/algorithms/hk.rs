use super::{one_sided_solve, Run, Side, SolveReport, SolverConfig, StepKind, Termination};
use crate::error::SolveError;
use crate::model::Model;

/// Greedy maximizer step, then the exact value of that policy against a best-responding minimizer.
pub fn run_hk(model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
    let mut run = Run::new("hk", model, config)?;
    let inner_tol = config.delta / 10.0;
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
        let (u, _, evals) = one_sided_solve(model, &b.policies, Side::Min, inner_tol)?;
        run.evaluations += evals;
        run.backups += evals;
        v = u;
        b = run.backup(&v)?;
        kind = StepKind::InnerSolve;
        k += 1;
    }
}
