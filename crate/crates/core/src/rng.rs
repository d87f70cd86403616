//! Seed streams.
//!
//! Every random quantity is driven by a `ChaCha8Rng` whose seed is derived
//! from a master seed and a stream path. Stream `r` of master `s` uses
//! `derive_seed(s, r) = splitmix64(s ^ splitmix64(r + GOLDEN))`, so replicate
//! results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(GOLDEN)))
}

/// Seed for a nested stream path, e.g. `[replicate, component]`.
pub fn derive_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |acc, &s| derive_seed(acc, s))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Well-known sub-streams of a single simulation seed.
pub mod streams {
    pub const LATENT: u64 = 0;
    pub const INNOVATION: u64 = 1;
    pub const AUXILIARY: u64 = 2;
}
