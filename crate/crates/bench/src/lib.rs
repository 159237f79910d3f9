//! Fixtures shared by the benchmarks.

use tkz::random::{gaussian_vec, seeded_rng};
use tkz::Tensor3;

/// Gaussian tensor drawn from `seed`.
pub fn random_tensor(n1: usize, n2: usize, n3: usize, seed: u64) -> Tensor3 {
    let mut rng = seeded_rng(seed);
    Tensor3::new(n1, n2, n3, gaussian_vec(&mut rng, n1 * n2 * n3)).expect("sizes match")
}
