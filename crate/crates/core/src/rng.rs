//! Seed discipline.
//!
//! A run has one 64-bit seed. Each consumer draws from its own ChaCha8
//! stream keyed by that seed, so problem data and the initial point are
//! reproducible independently of each other and of how many numbers the
//! other consumer draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used for generated problem data (targets, data matrices).
pub const STREAM_PROBLEM: u64 = 0;
/// Stream used for the initial point of a run.
pub const STREAM_INIT: u64 = 1;
/// Stream used by randomized diagnostics (retraction checks and similar).
pub const STREAM_DIAGNOSTIC: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
