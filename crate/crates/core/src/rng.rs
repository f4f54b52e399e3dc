//! Reproducible random streams.
//!
//! Every trajectory draws from its own ChaCha8 stream keyed by `seed + index`.
//! ChaCha is a counter-mode generator, so streams are independent of thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrajectoryRng = ChaCha8Rng;

/// Stream for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> TrajectoryRng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index))
}
