//! Per-item seed derivation so parallel and sequential runs draw identical
//! random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of a stream rooted at `base`. Depends only on the
/// pair, never on evaluation order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix(mix(base) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Seed for a named sub-stream, e.g. "tomography" vs "bootstrap".
pub fn derive_named(base: u64, name: &str) -> u64 {
    name.bytes().fold(mix(base), |acc, b| mix(acc ^ b as u64))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
