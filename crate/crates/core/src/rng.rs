//! Deterministic derivation of independent random streams.
//!
//! Every stochastic component receives its own ChaCha8 generator whose seed
//! is a hash of `(base seed, tag, index)`. Two runs with the same base seed
//! therefore consume identical streams no matter how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a tag and an index into a new 64-bit seed.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ tag.rotate_left(17)) ^ index.rotate_left(41))
}

pub fn stream(base: u64, tag: u64, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag, index))
}

/// Stream tags used across the crate.
pub mod tags {
    pub const INITIAL_DOE: u64 = 1;
    pub const LOCAL_DOE: u64 = 2;
    pub const RESTART: u64 = 3;
    pub const LEVEL_STEP: u64 = 4;
    pub const AL_INTERMEDIATE: u64 = 5;
    pub const AL_FINAL: u64 = 6;
    pub const FINAL_ESTIMATE: u64 = 7;
    pub const CHAIN: u64 = 8;
    pub const REPETITION: u64 = 9;
}
