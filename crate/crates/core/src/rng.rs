//! Deterministic random streams.
//!
//! Every stochastic quantity in a campaign draws from its own stream whose
//! seed is a hash of `(master seed, stage tag, instance id, repetition)`.
//! Streams never depend on scheduling order, so results are identical for
//! any number of worker threads.
//!
//! The hash is a SplitMix64 finalizer chain; the generator behind each
//! stream is Xoshiro256++ seeded through SplitMix64.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Stage tags keep streams for different pipeline stages disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Instances = 1,
    Anneal = 2,
    Bootstrap = 3,
    Synthetic = 4,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes an ordered list of words into one 64-bit seed.
pub fn derive_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6a09_e667_f3bc_c909, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn stream_seed(master: u64, stage: Stage, instance: u64, repetition: u64) -> u64 {
    derive_seed(&[master, stage as u64, instance, repetition])
}

pub fn stream(master: u64, stage: Stage, instance: u64, repetition: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(master, stage, instance, repetition))
}

pub fn from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
