//! Seed plumbing. Every random choice in the crate is a function of an
//! explicit `u64` seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The rng type used for sampling and noise.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a named sub-stream of `seed`.
#[inline]
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Uniform `[0, 1)` value determined by `(seed, a, b)`.
#[inline]
pub fn hash_unit(seed: u64, a: u64, b: u64) -> f64 {
    let h = splitmix64(derive_seed(seed, a) ^ splitmix64(b));
    // 53 high bits -> [0, 1)
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
