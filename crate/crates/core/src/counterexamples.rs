//! The two three-state games on which Filar–Tolwinski's Newton step never
//! finds an Armijo step, checked against closed-form residual increments.

use std::fmt;

use crate::algorithms::{ft_direction, SolverConfig};
use crate::bellman::{bellman_backup, bellman_backup_pinned, TiePins};
use crate::error::SolveError;
use crate::model::{build_counterexample_1, build_counterexample_2, MarkovGame, Model};
use crate::stagegame::build_stage_game;

/// Agreement required between measured and predicted increments.
pub const CERTIFICATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FailureCertificate {
    pub name: &'static str,
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// `ψ₂(v0+αd)² − ψ₂(v0)²`.
    pub measured_increment: Vec<f64>,
    pub predicted_increment: Vec<f64>,
    pub max_abs_error: f64,
    pub all_positive: bool,
}

impl FailureCertificate {
    pub fn is_valid(&self) -> bool {
        self.all_positive && self.max_abs_error <= CERTIFICATE_TOL
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,measured,predicted,abs_error\n");
        for ((a, m), p) in self.alpha_grid.iter().zip(&self.measured_increment).zip(&self.predicted_increment) {
            out.push_str(&format!("{a:e},{m:e},{p:e},{:e}\n", (m - p).abs()));
        }
        out
    }
}

impl fmt::Display for FailureCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: v0 = {:?}, d = {:?}", self.name, self.start, self.direction)?;
        writeln!(f, "{:>14} {:>22} {:>22} {:>10}", "alpha", "measured", "predicted", "error")?;
        for ((a, m), p) in self.alpha_grid.iter().zip(&self.measured_increment).zip(&self.predicted_increment) {
            writeln!(f, "{a:>14.6e} {m:>22.15e} {p:>22.15e} {:>10.2e}", (m - p).abs())?;
        }
        write!(
            f,
            "max |error| = {:.3e}, all positive = {}, valid = {}",
            self.max_abs_error,
            self.all_positive,
            self.is_valid()
        )
    }
}

fn alpha_grid(beta: f64) -> Vec<f64> {
    (0..=60).map(|i| beta.powi(i)).collect()
}

fn certify(
    name: &'static str,
    game: MarkovGame,
    v0: Vec<f64>,
    predicted: impl Fn(f64) -> f64,
) -> Result<FailureCertificate, SolveError> {
    let model = Model::Game(game);
    let pins = TiePins::pin_min(0, vec![1.0, 0.0]);
    let b = bellman_backup_pinned(&model, &v0, &pins)?;
    let (d, _) = ft_direction(&model, &v0, &b)?;
    let base = b.residual_l2_sq(&v0);
    let grid = alpha_grid(SolverConfig::default().armijo_beta);
    let mut measured = Vec::with_capacity(grid.len());
    let mut expected = Vec::with_capacity(grid.len());
    let mut max_abs_error: f64 = 0.0;
    for &alpha in &grid {
        let w: Vec<f64> = v0.iter().zip(&d).map(|(x, y)| x + alpha * y).collect();
        let inc = bellman_backup(&model, &w)?.residual_l2_sq(&w) - base;
        let p = predicted(alpha);
        max_abs_error = max_abs_error.max((inc - p).abs());
        measured.push(inc);
        expected.push(p);
    }
    let all_positive = measured.iter().all(|&x| x > 0.0);
    Ok(FailureCertificate {
        name,
        start: v0,
        direction: d,
        alpha_grid: grid,
        measured_increment: measured,
        predicted_increment: expected,
        max_abs_error,
        all_positive,
    })
}

fn checked(c: FailureCertificate) -> Result<FailureCertificate, SolveError> {
    for ((&alpha, &measured), &predicted) in c.alpha_grid.iter().zip(&c.measured_increment).zip(&c.predicted_increment) {
        if (measured - predicted).abs() > CERTIFICATE_TOL {
            return Err(SolveError::CertificateMismatch { alpha, measured, predicted });
        }
    }
    Ok(c)
}

/// First game from `v0 = 0` with the minimizer tie at `s1` resolved to `b1`.
pub fn verify_ft_failure_example1() -> Result<FailureCertificate, SolveError> {
    let r2 = std::f64::consts::SQRT_2;
    let c1 = (3.0 * r2 - 4.0) / 2.0;
    let c2 = (13.0 - 6.0 * r2) / 4.0;
    checked(certify("ft1", build_counterexample_1(), vec![0.0; 3], |a| c1 * a + c2 * a * a)?)
}

/// Second game from `v0 = r_max·𝟙 = ½·𝟙`.
pub fn verify_ft_failure_example2() -> Result<FailureCertificate, SolveError> {
    checked(certify("ft2", build_counterexample_2(), vec![0.5; 3], |a| 76.0 / 25.0 * a + 302.0 / 25.0 * a * a)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimizerChoice {
    /// Pure `b2` is the unique best response at `s1`.
    Switched,
    /// Both minimizer actions are optimal.
    Tie,
    /// Pure `b1` is the unique best response.
    Stayed,
}

/// Greedy minimizer at `s1` of the first game for the value function `v`.
pub fn verify_minimizer_switch(v: &[f64]) -> MinimizerChoice {
    let g = build_stage_game(&build_counterexample_1(), v, 0);
    let (b1, b2) = (g.get(0, 0), g.get(0, 1));
    if b2 < b1 {
        MinimizerChoice::Switched
    } else if b1 < b2 {
        MinimizerChoice::Stayed
    } else {
        MinimizerChoice::Tie
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{run_ft, Termination};
    use std::f64::consts::FRAC_1_SQRT_2 as H;

    #[test]
    fn first_certificate() {
        let c = verify_ft_failure_example1().unwrap();
        assert!(c.is_valid());
        assert_eq!(c.alpha_grid.len(), 61);
        let d = [0.75 - H, -1.25, 1.25];
        assert!(c.direction.iter().zip(d).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!((c.measured_increment[0] - 1.25).abs() < 1e-10);
    }

    #[test]
    fn second_certificate() {
        let c = verify_ft_failure_example2().unwrap();
        assert!(c.is_valid());
        assert!(c.direction.iter().zip([1.0, -3.0, 2.0]).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!((c.measured_increment[0] - 15.12).abs() < 1e-10);
    }

    #[test]
    fn switch_along_direction() {
        let d = [0.75 - H, -1.25, 1.25];
        for alpha in [1.0, 1e-6] {
            let v: Vec<f64> = d.iter().map(|x| alpha * x).collect();
            assert_eq!(verify_minimizer_switch(&v), MinimizerChoice::Switched);
        }
        assert_eq!(verify_minimizer_switch(&[0.0; 3]), MinimizerChoice::Tie);
    }

    #[test]
    fn b2_tie_lets_ft_converge() {
        let m = Model::Game(build_counterexample_1());
        let cfg = SolverConfig::default().with_pins(TiePins::pin_min(0, vec![0.0, 1.0]));
        let r = run_ft(&m, &cfg, &[0.0; 3]).unwrap();
        assert_eq!(r.termination, Termination::Converged);
    }
}
