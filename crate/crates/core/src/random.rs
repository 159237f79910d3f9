//! Seeded randomness. All stochastic code draws from [`Rng64`], a ChaCha8
//! stream keyed by a `u64` seed, so a seed reproduces the same draws on every
//! platform.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng64 = rand_chacha::ChaCha8Rng;

/// Seed used when a caller supplies none.
pub const DEFAULT_SEED: u64 = 0x7e45_0a5c_2024_0001;

pub fn seeded_rng(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut Rng64) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_vec(rng: &mut Rng64, len: usize) -> Vec<f64> {
    (0..len).map(|_| gaussian(rng)).collect()
}
