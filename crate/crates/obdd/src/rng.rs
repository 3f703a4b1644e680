//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator seeded with `seed_from_u64(seed)`
//! and switched to a fixed stream id, so instance draws and noise draws
//! for one seed never overlap and do not depend on each other's order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Codebooks, delays, amplitudes and messages.
    Instance = 1,
    /// Additive measurement noise.
    Noise = 2,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Seed of trial `index` in an experiment with base seed `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}
