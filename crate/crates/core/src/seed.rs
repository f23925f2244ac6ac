//! Seed splitting.
//!
//! Every random stream is derived from one user seed:
//! `derive(seed, stream) = splitmix64(seed + (stream + 1) * 0x9E3779B97F4A7C15)`.
//! Nested streams apply `derive` repeatedly, e.g. the `i`-th sampled
//! sequence of a fit uses `derive(derive(seed, FIT), i)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for the random 3rd-order transition tensor.
pub const CHAIN: u64 = 0;
/// Stream tag for sampled evaluation context prefixes.
pub const CONTEXTS: u64 = 1;
/// Stream tag for count-model training sequences.
pub const FIT: u64 = 2;
/// Stream tag for random model parameters in tests and tools.
pub const PARAMS: u64 = 3;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
