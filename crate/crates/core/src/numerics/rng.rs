//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 generators. Independent streams are
//! derived from a base seed plus a path of integer tags, mixed with
//! SplitMix64, so a stream depends only on `(seed, tags)` and never on how
//! many numbers other streams consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const ALGORITHM: &str = "chacha8";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a seed with a tag path into a new 64-bit seed.
pub fn sub_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, tags))
}

/// FNV-1a over bytes; stable across platforms and compiler versions.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
