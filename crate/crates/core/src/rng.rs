//! Per-trial random streams.
//!
//! A sweep is identified by a single `base_seed`. Trial `i` of the sweep
//! runs on its own ChaCha8 stream seeded with `split_seed(base_seed, i)`,
//! so results do not depend on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator every trial runs on.
pub type TrialRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of trial `index` from a sweep's base seed.
///
/// The base seed is scrambled with the SplitMix64 finalizer, then the
/// trial index is added as a Weyl increment and the result is scrambled
/// again: `mix(mix(base) + (index + 1) * 0x9E3779B97F4A7C15)`.
pub fn split_seed(base_seed: u64, index: u64) -> u64 {
    mix64(mix64(base_seed).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator for a single trial seed.
pub fn trial_rng(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}
