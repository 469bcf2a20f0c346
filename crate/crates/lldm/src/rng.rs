//! Seeded random number generation.
//!
//! Every stochastic routine takes an explicit generator or seed. Independent
//! streams for parallel work are derived from a master seed and an index, so
//! results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator seeded from a 64-bit value.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `master`. Distinct indices give unrelated seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// Seed for a named sub-stream (e.g. the path sampler vs. the initial
/// configurations) of the same master seed.
pub fn derive_stream(master: u64, stream: &str) -> u64 {
    stream
        .bytes()
        .fold(mix64(master ^ 0x5851_f42d_4c95_7f2d), |acc, b| {
            mix64(acc ^ u64::from(b))
        })
}
