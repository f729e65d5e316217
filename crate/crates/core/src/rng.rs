//! Seeding for reproducible, scheduling-independent random streams.
//!
//! Every replicate of an experiment gets its own generator whose seed is a
//! pure function of `(master_seed, replicate_index)`, so results do not
//! depend on how replicates are distributed across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type ChainRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`: `mix64(master ^ mix64(index + 1))`.
pub fn stream_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(1)))
}

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChainRng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, index: u64) -> ChainRng {
    rng_from_seed(stream_seed(master, index))
}
