use super::{Run, SolveReport, SolverConfig, StepKind, Termination};
use crate::error::SolveError;
use crate::model::Model;

/// Value iteration: `v ← 𝔗v` until the certificate drops below `ε`.
pub fn run_vi(model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
    let mut run = Run::new("vi", model, config)?;
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
        v = std::mem::take(&mut b.new_value);
        b = run.backup(&v)?;
        kind = StepKind::Backup;
        k += 1;
    }
}
