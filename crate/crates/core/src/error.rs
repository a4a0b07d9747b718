use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("simplex exceeded its pivot cap ({pivots} pivots)")]
    LpIterationCap { pivots: usize },
    #[error("linear program is unbounded")]
    LpUnbounded,
    #[error("linear program is infeasible (phase-one residual {residual:e})")]
    LpInfeasible { residual: f64 },
    #[error("matrix game solve failed on {rows}x{cols} payoff {payoff:?}: {source}")]
    MatrixGame {
        rows: usize,
        cols: usize,
        payoff: Vec<f64>,
        #[source]
        source: Box<SolveError>,
    },
    #[error("backup failed at state {state}: {source}")]
    Backup {
        state: usize,
        #[source]
        source: Box<SolveError>,
    },
    #[error("singular policy-evaluation system")]
    SingularSystem,
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("increment at alpha = {alpha:e} is {measured:e}, expected {predicted:e}")]
    CertificateMismatch { alpha: f64, measured: f64, predicted: f64 },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("model failed validation with {} violation(s): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("unsupported model: {0}")]
    Unsupported(String),
}

fn summarize(v: &[Violation]) -> String {
    v.iter().take(5).map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ModelError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ModelError::Io { path: path.into(), source }
    }
}
