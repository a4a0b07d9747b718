//! Solvers for discounted zero-sum Markov games and s-rectangular L1 robust MDPs.

pub mod algorithms;
pub mod bellman;
pub mod benchgen;
pub mod counterexamples;
pub mod error;
pub mod harness;
pub mod model;
pub mod stagegame;

pub use bellman::{BackupResult, MinPolicy, PolicyPair, ValueFunction};
pub use error::{ModelError, SolveError};
pub use model::{MarkovGame, Model, RobustMdp};
pub use stagegame::{GameSolution, MatrixGame};
