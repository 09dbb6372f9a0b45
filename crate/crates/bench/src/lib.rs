//! Shared fixtures for the benchmarks.

use bngp::attacks::AttackConfig;
use bngp::data::{generate_synthetic_population, MembershipPrior, PopulationDataset};
use bngp::defense::{DefenderConfig, GameSchedule, Kappa};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

/// The desk-scale game instance with a short schedule.
pub fn desk_game(rounds: usize) -> (PopulationDataset, MembershipPrior, DefenderConfig, AttackConfig) {
    let (k, m) = (40, 100);
    let data = generate_synthetic_population(k, m, 0.02, 0.3, 0).expect("valid synthetic parameters");
    let prior = MembershipPrior::uniform_bernoulli(k, 0.5).expect("valid prior");
    let mut def = DefenderConfig::two_hidden(k, m, 8, (64, 64), Kappa::Scalar(1.5), 1);
    def.schedule = GameSchedule {
        rounds,
        attacker_steps: 10,
        batch_size: 64,
        rounds_per_epoch: 50,
        patience: None,
        min_improvement: 1e-4,
    };
    let att = AttackConfig::single_hidden(m, k, 64, 2);
    (data, prior, def, att)
}
