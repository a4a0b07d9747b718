//! Solvers over a common configuration and report format.

mod ft;
mod hk;
mod pai;
mod rcpi;
mod vi;
mod ws;

use std::fmt;
use std::time::{Duration, Instant};

pub use ft::{ft_direction, ft_line_search, run_ft, LineSearch};
pub use hk::run_hk;
pub use pai::run_pai;
pub use rcpi::{rcpi_delta_limit, run_rcpi};
pub use vi::run_vi;
pub use ws::run_ws;

use crate::bellman::{
    bellman_backup_pinned, evaluate_policies, max_response_backup, min_response_backup, BackupResult,
    PolicyPair, TiePins, ValueFunction,
};
use crate::error::SolveError;
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// Backup tolerance used by the certificate and the RCPI guards.
    pub delta: f64,
    /// Maximum RCPI recovery steps; `None` is unbounded.
    pub m: Option<usize>,
    pub armijo_beta: f64,
    pub armijo_coeff: f64,
    pub armijo_max_i: u32,
    pub ws_sweeps: usize,
    pub iter_cap: usize,
    pub time_cap: Option<Duration>,
    pub pins: TiePins,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            delta: 1e-9,
            m: None,
            armijo_beta: 0.8,
            armijo_coeff: 1e-4,
            armijo_max_i: 60,
            ws_sweeps: 10,
            iter_cap: 100_000,
            time_cap: None,
            pins: TiePins::none(),
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_m(mut self, m: Option<usize>) -> Self {
        self.m = m;
        self
    }

    pub fn with_pins(mut self, pins: TiePins) -> Self {
        self.pins = pins;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.epsilon > 0.0) {
            return Err(SolveError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.delta >= 0.0) {
            return Err(SolveError::Config(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if !unit(self.armijo_beta) || !unit(self.armijo_coeff) {
            return Err(SolveError::Config("armijo_beta and armijo_coeff must lie in (0,1)".into()));
        }
        if self.iter_cap == 0 {
            return Err(SolveError::Config("iter_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Initial,
    /// `v ← 𝔗v`.
    Backup,
    /// An accepted joint evaluation after `recoveries` repair backups.
    Evaluation { recoveries: usize },
    /// RCPI rejected the evaluation and took a plain backup instead.
    Fallback,
    /// FT step `v + βⁱd`.
    LineSearch { exponent: u32 },
    /// Backup followed by policy-evaluation sweeps.
    Sweep,
    /// Maximizer greedy step followed by an exact inner minimization.
    InnerSolve,
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepKind::Initial => f.write_str("initial"),
            StepKind::Backup => f.write_str("backup"),
            StepKind::Evaluation { recoveries } => write!(f, "eval:{recoveries}"),
            StepKind::Fallback => f.write_str("fallback"),
            StepKind::LineSearch { exponent } => write!(f, "armijo:{exponent}"),
            StepKind::Sweep => f.write_str("sweep"),
            StepKind::InnerSolve => f.write_str("inner"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    NoDescentStep,
    IterCap,
    TimeCap,
    CycleDetected,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::NoDescentStep => "no_descent_step",
            Termination::IterCap => "iter_cap",
            Termination::TimeCap => "time_cap",
            Termination::CycleDetected => "cycle_detected",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// State of one iterate. Counters are cumulative.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub elapsed_s: f64,
    pub residual_inf: f64,
    pub residual_l2_sq: f64,
    pub backups: usize,
    pub evaluations: usize,
    pub step_kind: StepKind,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub algorithm: String,
    pub final_value: ValueFunction,
    /// Greedy pair at `final_value`.
    pub final_policies: PolicyPair,
    /// Value updates performed. A failed FT line search counts as an iteration.
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
    pub termination: Termination,
    pub certified_epsilon: f64,
    pub delta: f64,
    pub elapsed: Duration,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn backups(&self) -> usize {
        self.trace.last().map_or(0, |t| t.backups)
    }

    pub fn evaluations(&self) -> usize {
        self.trace.last().map_or(0, |t| t.evaluations)
    }
}

/// `2γ/(1−γ)·(ψ + δ)`.
pub fn certificate(gamma: f64, psi_inf: f64, delta: f64) -> f64 {
    2.0 * gamma / (1.0 - gamma) * (psi_inf + delta)
}

/// Number of iterations after which a contracting scheme started at zero is
/// guaranteed to certify `epsilon`.
pub fn iteration_bound_z(gamma: f64, epsilon: f64, delta: f64, r_max: f64) -> Result<usize, SolveError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SolveError::Domain(format!("gamma {gamma} outside (0,1)")));
    }
    let arg = (1.0 - gamma) * epsilon / (2.0 * gamma) - (3.0 + gamma) * delta / (1.0 - gamma);
    if !(arg > 0.0) {
        return Err(SolveError::Domain(format!("log argument {arg:e} is not positive")));
    }
    let z = ((arg.ln() - (r_max + delta).ln()) / gamma.ln()).ceil();
    Ok(if z > 0.0 { z as usize } else { 0 })
}

/// Bookkeeping shared by every solver run.
pub(crate) struct Run<'a> {
    pub model: &'a Model,
    pub config: &'a SolverConfig,
    name: &'static str,
    start: Instant,
    pub backups: usize,
    pub evaluations: usize,
    trace: Vec<TraceRecord>,
}

impl<'a> Run<'a> {
    pub fn new(name: &'static str, model: &'a Model, config: &'a SolverConfig) -> Result<Self, SolveError> {
        config.validate()?;
        let floor = certificate(model.gamma(), 0.0, config.delta);
        if floor >= config.epsilon {
            return Err(SolveError::Config(format!(
                "epsilon {:e} is unreachable with delta {:e}: the certificate never drops below {floor:e}",
                config.epsilon, config.delta
            )));
        }
        Ok(Self { model, config, name, start: Instant::now(), backups: 0, evaluations: 0, trace: Vec::new() })
    }

    pub fn gamma(&self) -> f64 {
        self.model.gamma()
    }

    pub fn backup(&mut self, v: &[f64]) -> Result<BackupResult, SolveError> {
        self.backups += 1;
        bellman_backup_pinned(self.model, v, &self.config.pins)
    }

    pub fn evaluate(&mut self, pair: &PolicyPair) -> Result<ValueFunction, SolveError> {
        self.evaluations += 1;
        evaluate_policies(self.model, pair)
    }

    /// Appends a trace row for iterate `v` with backup `b` and returns `ψ_∞(v)`.
    pub fn record(&mut self, iter: usize, v: &[f64], b: &BackupResult, kind: StepKind) -> f64 {
        let residual_inf = b.residual_inf(v);
        self.trace.push(TraceRecord {
            iter,
            elapsed_s: self.start.elapsed().as_secs_f64(),
            residual_inf,
            residual_l2_sq: b.residual_l2_sq(v),
            backups: self.backups,
            evaluations: self.evaluations,
            step_kind: kind,
        });
        residual_inf
    }

    pub fn certified(&self, psi: f64) -> bool {
        certificate(self.gamma(), psi, self.config.delta) <= self.config.epsilon
    }

    /// Cap check made before starting iteration `k + 1`.
    pub fn cap(&self, k: usize) -> Option<Termination> {
        if k >= self.config.iter_cap {
            return Some(Termination::IterCap);
        }
        match self.config.time_cap {
            Some(t) if self.start.elapsed() >= t => Some(Termination::TimeCap),
            _ => None,
        }
    }

    pub fn finish(
        self,
        v: ValueFunction,
        b: BackupResult,
        psi: f64,
        iterations: usize,
        termination: Termination,
    ) -> SolveReport {
        SolveReport {
            algorithm: self.name.to_string(),
            final_value: v,
            final_policies: b.policies,
            iterations,
            trace: self.trace,
            termination,
            certified_epsilon: certificate(self.model.gamma(), psi, self.config.delta),
            delta: self.config.delta,
            elapsed: self.start.elapsed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Max,
    Min,
}

/// Policy iteration for one player while the other is held fixed.
///
/// Returns the optimal one-sided value, the improved pair and the number of
/// evaluations spent. Stops once no state improves by more than `tol`.
pub(crate) fn one_sided_solve(
    model: &Model,
    pair: &PolicyPair,
    side: Side,
    tol: f64,
) -> Result<(ValueFunction, PolicyPair, usize), SolveError> {
    const CAP: usize = 10_000;
    let mut cur = pair.clone();
    let mut evals = 0;
    loop {
        let u = evaluate_policies(model, &cur)?;
        evals += 1;
        let scale = 1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let improved = match side {
            Side::Min => {
                let (w, sigma) = min_response_backup(model, &cur.max_policy, &u);
                let better = u.iter().zip(&w).any(|(a, b)| a - b > tol * scale);
                if better {
                    cur.min_policy = sigma;
                }
                better
            }
            Side::Max => {
                let (w, pi) = max_response_backup(model, &cur.min_policy, &u);
                let better = u.iter().zip(&w).any(|(a, b)| b - a > tol * scale);
                if better {
                    cur.max_policy = pi;
                }
                better
            }
        };
        if !improved || evals >= CAP {
            return Ok((u, cur, evals));
        }
    }
}

/// Exploitability of a policy pair at the initial state:
/// `(max_π' v^{π',σ} − v^{π,σ}, v^{π,σ} − min_σ' v^{π,σ'})`.
pub fn best_response_gap(model: &Model, policies: &PolicyPair) -> Result<(f64, f64), SolveError> {
    let s0 = model.initial_state();
    let v = evaluate_policies(model, policies)?;
    let (hi, _, _) = one_sided_solve(model, policies, Side::Max, 1e-13)?;
    let (lo, _, _) = one_sided_solve(model, policies, Side::Min, 1e-13)?;
    Ok((hi[s0] - v[s0], v[s0] - lo[s0]))
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::MinPolicy;
    use crate::model::build_counterexample_1;
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    #[test]
    fn z_bound_examples() {
        // ln(0.4e-3/1.2) = −8.0064, ln(√2/2) = −0.3466, ratio over ln 0.6 = 14.995.
        assert_eq!(iteration_bound_z(0.6, 1e-3, 0.0, H).unwrap(), 15);
        assert!(iteration_bound_z(0.6, 1e-3, 1e-3, H).is_err());
        assert_eq!(iteration_bound_z(0.5, 10.0, 0.0, 1.0).unwrap(), 0);
    }

    #[test]
    fn gaps_on_first_counterexample() {
        let m = Model::Game(build_counterexample_1());
        let best = PolicyPair {
            max_policy: vec![vec![1.0]; 3],
            min_policy: MinPolicy::Mixed(vec![vec![0.0, 1.0], vec![1.0], vec![1.0]]),
        };
        let (a, b) = best_response_gap(&m, &best).unwrap();
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        let bad = PolicyPair {
            max_policy: vec![vec![1.0]; 3],
            min_policy: MinPolicy::Mixed(vec![vec![1.0, 0.0], vec![1.0], vec![1.0]]),
        };
        let (a, b) = best_response_gap(&m, &bad).unwrap();
        assert!(a.abs() < 1e-12);
        // 0.6·5/4 − (−0.6·5/4) = 1.5
        assert!((b - 1.5).abs() < 1e-10);
    }

    #[test]
    fn config_rejects_bad_armijo() {
        let c = SolverConfig { armijo_beta: 1.0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
    }
}
