//! Seed derivation for independent, schedule-free random streams.
//!
//! Every parallel unit of work (a subject, a segment, a grid cell) owns a
//! seed derived from the run seed and its coordinates:
//!
//! ```text
//! derive(seed, [a, b, ...]) = fold(splitmix64(seed), |s, x| splitmix64(s ^ splitmix64(x + 1)))
//! ```
//!
//! `splitmix64` is the finalizer from Steele et al.'s SplitMix generator.
//! The result depends only on the inputs, so work can be scheduled in any
//! order without changing output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |s, &x| {
        splitmix64(s ^ splitmix64(x.wrapping_add(1)))
    })
}

/// Portable seeded generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
