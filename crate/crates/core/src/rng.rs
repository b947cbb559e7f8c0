//! Seed derivation shared by every randomized operation.
//!
//! Two generators are used, both with published reference streams:
//! SplitMix64 for per-pixel streams and ChaCha8 for global draws
//! (shuffles, sampling without replacement). Per-pixel streams are keyed
//! by `(seed, pixel index)`, so any row partitioning of the work produces
//! the same output as a sequential pass.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::SplitMix64;
use sha2::{Digest, Sha256};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for the stream of element `index` under `seed`.
pub fn stream_key(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Independent generator for one pixel (or any indexed element).
pub fn pixel_rng(seed: u64, index: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(stream_key(seed, index))
}

pub fn global_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a 64-bit seed from a base seed and a list of string tags
/// (entry ids, noise cells, purpose labels). Order-sensitive.
pub fn derive_seed(base: u64, tags: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for tag in tags {
        hasher.update((tag.len() as u64).to_le_bytes());
        hasher.update(tag.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
