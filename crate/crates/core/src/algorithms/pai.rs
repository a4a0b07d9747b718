use std::collections::VecDeque;

use super::{max_abs_diff, Run, SolveReport, SolverConfig, StepKind, Termination};
use crate::error::SolveError;
use crate::model::Model;

const CYCLE_WINDOW: usize = 64;
const CYCLE_TOL: f64 = 1e-10;

/// Joint greedy selection followed by exact evaluation of the selected pair.
pub fn run_pai(model: &Model, config: &SolverConfig, v0: &[f64]) -> Result<SolveReport, SolveError> {
    let mut run = Run::new("pai", model, config)?;
    let mut v = v0.to_vec();
    let mut b = run.backup(&v)?;
    let mut kind = StepKind::Initial;
    let mut seen: VecDeque<Vec<f64>> = VecDeque::with_capacity(CYCLE_WINDOW);
    let mut k = 0;
    loop {
        let psi = run.record(k, &v, &b, kind);
        if run.certified(psi) {
            return Ok(run.finish(v, b, psi, k, Termination::Converged));
        }
        if let Some(t) = run.cap(k) {
            return Ok(run.finish(v, b, psi, k, t));
        }
        let u = run.evaluate(&b.policies)?;
        if seen.len() == CYCLE_WINDOW {
            seen.pop_front();
        }
        seen.push_back(v);
        if seen.iter().any(|w| max_abs_diff(w, &u) <= CYCLE_TOL) {
            let v = seen.pop_back().expect("just pushed");
            return Ok(run.finish(v, b, psi, k, Termination::CycleDetected));
        }
        v = u;
        b = run.backup(&v)?;
        kind = StepKind::Evaluation { recoveries: 0 };
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::TiePins;
    use crate::model::{build_counterexample_1, RobustEntry, RobustMdp, RobustState};
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    #[test]
    fn first_counterexample_with_b2_tie() {
        let m = Model::Game(build_counterexample_1());
        let cfg = SolverConfig::default().with_pins(TiePins::pin_min(0, vec![0.0, 1.0]));
        let r = run_pai(&m, &cfg, &[0.0; 3]).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        let vstar = [-H - 0.75, -1.25, 1.25];
        assert!(max_abs_diff(&r.final_value, &vstar) < 1e-12);
    }

    #[test]
    fn single_state_mdp_one_evaluation() {
        let m = Model::Robust(RobustMdp {
            gamma: 0.9,
            initial_state: 0,
            states: vec![RobustState {
                budget: 0.0,
                entries: vec![
                    RobustEntry::new(vec![(0, 1.0)], vec![(0, 1.0)]),
                    RobustEntry::new(vec![(0, 1.0)], vec![(0, 0.5)]),
                ],
            }],
        });
        let r = run_pai(&m, &SolverConfig::default(), &[0.0]).unwrap();
        assert!(r.converged());
        assert_eq!(r.iterations, 1);
        assert_eq!(r.evaluations(), 1);
        assert!((r.final_value[0] - 10.0).abs() < 1e-9);
    }
}
