//! Fixed instances shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_core::benchgen::{generate, Domain, GenSpec};
use saddle_core::{MatrixGame, Model};

/// Uniform payoffs in [−1, 1].
pub fn random_matrix_game(rows: usize, cols: usize, seed: u64) -> MatrixGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    MatrixGame::from_rows(&data)
}

pub fn instance(domain: Domain, size: usize, gamma: f64) -> Model {
    generate(&GenSpec::new(domain, size, gamma, 11))
}

/// One small instance per domain, labelled.
pub fn small_instances(gamma: f64) -> Vec<(String, Model)> {
    [(Domain::RandomMg, 30), (Domain::GamblersRuin, 15), (Domain::Gridworld, 4), (Domain::Inventory, 9)]
        .into_iter()
        .map(|(d, n)| (format!("{d}-{n}"), instance(d, n, gamma)))
        .collect()
}
