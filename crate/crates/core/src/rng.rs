//! Seed handling.
//!
//! Every random stream in the crate is a `Xoshiro256PlusPlus` seeded from a
//! 64-bit value. Independent streams for one run (teacher weights, student
//! initialisation, inputs, label noise) are derived from a single master seed
//! with [`derive_seed`], a SplitMix64 finaliser applied to
//! `master + (index + 1) * 0x9E3779B97F4A7C15`.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

/// Stream indices used by [`crate::sgd::run`] and friends.
pub mod stream {
    pub const TEACHER: u64 = 0;
    pub const STUDENT: u64 = 1;
    pub const INPUTS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const DATASET: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const SECOND_LAYER: u64 = 6;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from(master: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, index))
}
