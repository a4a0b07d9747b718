use super::{Run, SolveReport, SolverConfig, StepKind, Termination};
use crate::bellman::apply_policy_operator;
use crate::error::SolveError;
use crate::model::Model;

/// Each improvement backup is followed by `ws_sweeps` applications of the
/// greedy pair's evaluation operator.
pub fn run_ws(model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
    let mut run = Run::new("ws", model, config)?;
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
        for _ in 0..config.ws_sweeps {
            v = apply_policy_operator(model, &b.policies, &v);
            run.backups += 1;
        }
        b = run.backup(&v)?;
        kind = if config.ws_sweeps == 0 { StepKind::Backup } else { StepKind::Sweep };
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::run_vi;
    use crate::model::build_counterexample_1;
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    #[test]
    fn zero_sweeps_is_value_iteration() {
        let m = Model::Game(build_counterexample_1());
        let cfg = SolverConfig { ws_sweeps: 0, ..SolverConfig::default() };
        let a = run_ws(&m, &cfg, &[0.0; 3]).unwrap();
        let b = run_vi(&m, &cfg, &[0.0; 3]).unwrap();
        assert_eq!(a.final_value, b.final_value);
        let res = |r: &SolveReport| r.trace.iter().map(|t| t.residual_inf).collect::<Vec<_>>();
        assert_eq!(res(&a), res(&b));
    }

    #[test]
    fn five_sweeps_converge() {
        let m = Model::Game(build_counterexample_1());
        let cfg = SolverConfig { ws_sweeps: 5, ..SolverConfig::default() };
        let r = run_ws(&m, &cfg, &[0.0; 3]).unwrap();
        assert!(r.converged());
        let vstar = [-H - 0.75, -1.25, 1.25];
        for (a, b) in r.final_value.iter().zip(vstar) {
            assert!((a - b).abs() <= r.certified_epsilon);
        }
    }
}
