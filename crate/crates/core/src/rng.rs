//! Seeding helpers. Every random choice in the crate flows from an explicit
//! 64-bit seed through these functions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent child seed from `seed` and a stream tag.
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag))
}

/// Derives a child seed from a textual tag.
pub fn derive_named(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive(seed, h)
}

/// Uniform in `[0, 1)` as a pure function of `(seed, a, b)`.
pub fn unit(seed: u64, a: u64, b: u64) -> f64 {
    let x = mix(derive(seed, a) ^ mix(b.wrapping_add(0x632b_e59b_d9b4_e019)));
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
