//! Named, independent RNG streams derived from one master seed.
//!
//! Every stochastic stage (splitting, augmentation, weight init, policy
//! sampling) draws from its own stream so that changing one stage never
//! shifts the random numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// FNV-1a over the bytes, stable across platforms and toolchains.
fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed`, a stream name and an index.
pub fn derive(seed: u64, name: &str, index: u64) -> u64 {
    let h = fnv1a(name.as_bytes(), 0xcbf2_9ce4_8422_2325);
    mix(seed ^ mix(h ^ mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

pub fn stream(seed: u64, name: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(seed, name, index))
}

pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
