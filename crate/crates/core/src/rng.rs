//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha8 stream addressed by
//! `(seed, stream)`. ChaCha is counter based, so replicate `k` sees the same
//! numbers no matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids are namespaced by a small tag so that, e.g., the population
/// draw and the bootstrap draw of the same replicate never collide.
pub fn stream(seed: u64, tag: u32, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((tag as u64) << 48) ^ index);
    rng
}

/// Child seed for nested experiments (SplitMix64 finalizer of `seed ⊕ index`).
pub fn derive(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod tags {
    pub const POPULATION: u32 = 1;
    pub const SAMPLE: u32 = 2;
    pub const BOOTSTRAP: u32 = 3;
    pub const FAIRNESS: u32 = 4;
    pub const PORTFOLIO: u32 = 5;
    pub const MULTISTART: u32 = 6;
}
