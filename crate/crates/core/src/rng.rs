//! Seed plumbing. Every random draw in the crate comes from a ChaCha stream
//! keyed by an explicit seed, so runs never depend on wall-clock state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed for a named purpose (`tag`) from a parent seed.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = mix64(seed);
    for b in tag.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    h
}

pub fn rng_for(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
