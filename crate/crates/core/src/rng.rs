//! Seeded, order-independent random streams.
//!
//! Every random quantity is addressed by `(seed, purpose, replication, ...)`
//! so replications can be generated in any order or in parallel and still
//! reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_LATTICE_SHIFT: u64 = 0x4c41_5453;
pub(crate) const TAG_LMS: u64 = 0x4c4d_5300;
pub(crate) const TAG_DIGITAL_SHIFT: u64 = 0x4453_4846;
pub(crate) const TAG_PERMUTATION: u64 = 0x5045_524d;
pub(crate) const TAG_NUS: u64 = 0x4e55_5300;
pub(crate) const TAG_IID: u64 = 0x4949_4400;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a key tuple into one word; used as a counter-based generator.
#[inline]
pub fn key_hash(keys: &[u64]) -> u64 {
    keys.iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &k| mix64(acc ^ mix64(k)))
}

/// Uniform double in `[0, 1)` from the top 53 bits of `u`.
#[inline]
pub fn unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent ChaCha stream for the given purpose and key.
pub fn stream(seed: u64, tag: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::with_capacity(keys.len() + 1);
    all.push(tag);
    all.extend_from_slice(keys);
    rng.set_stream(key_hash(&all));
    rng
}
