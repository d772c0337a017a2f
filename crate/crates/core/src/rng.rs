//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! caller's seed. Independent work items (pixels, batch items, samples) take
//! their own stream: the 64-bit stream id is `domain << 48 | index`, so serial
//! and parallel execution consume identical numbers per item.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream domains. Keeping them distinct stops e.g. threshold jitter and
/// background noise for the same pixel from sharing random numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Thresholds = 1,
    Noise = 2,
    Sample = 3,
    Train = 4,
    Init = 5,
    Features = 6,
    Toy = 7,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> Rng {
    debug_assert!(index < 1 << 48);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | index);
    rng
}

/// Independent sub-seed for item `index` of a run seeded with `seed` (SplitMix64 finalizer).
pub fn derive(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
