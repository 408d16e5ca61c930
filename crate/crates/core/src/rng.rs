//! Deterministic per-item random streams.
//!
//! Every generator derives its RNG from `(global seed, item key, index)` so
//! that output never depends on iteration order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8], mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a string key and an integer index into a 64-bit stream id.
pub fn stream_seed(seed: u64, key: &str, index: u64) -> u64 {
    let mut h = fnv1a(&seed.to_le_bytes(), FNV_OFFSET);
    h = fnv1a(key.as_bytes(), h);
    h = fnv1a(&[0xff], h);
    h = fnv1a(&index.to_le_bytes(), h);
    splitmix64(h)
}

/// RNG for the stream identified by `(seed, key, index)`.
pub fn stream_rng(seed: u64, key: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, key, index))
}

/// Plain seeded RNG.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed))
}
