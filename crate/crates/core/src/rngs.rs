//! Deterministic seed fan-out.
//!
//! Every stochastic operation takes a seed rather than a shared generator, and
//! derives independent ChaCha streams from `(seed, labels...)`. Streams depend
//! only on the labels, so results do not change with thread count or with the
//! order in which samples are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named sub-stream tags.
pub mod tag {
    pub const DATASET: u64 = 0x6461_7461;
    pub const FORWARD: u64 = 0x666f_7277;
    pub const TRAIN: u64 = 0x7472_6169;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const SAMPLE: u64 = 0x7361_6d70;
    pub const QAE: u64 = 0x7161_6500;
    pub const HELDOUT: u64 = 0x686f_6c64;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a label path into a new 64-bit seed.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Returns an independent generator for `(seed, labels...)`.
pub fn stream(seed: u64, labels: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, labels))
}
