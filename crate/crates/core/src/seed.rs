//! Per-replicate random stream derivation.
//!
//! A child seed is a pure function of `(master seed, replicate index, stream
//! label)`, so replicates can run on any number of threads, in any order,
//! and still draw identical numbers. The label is hashed with 64-bit FNV-1a
//! and the three words are combined through the SplitMix64 finalizer:
//!
//! ```text
//! child = mix(mix(mix(master) ^ index) ^ fnv1a(label))
//! ```
//!
//! Streams are `ChaCha8Rng::seed_from_u64(child)`, whose output is stable
//! across platforms and releases of `rand_chacha`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn child_seed(master: u64, index: u64, label: &str) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ index) ^ fnv1a(label))
}

pub fn stream(master: u64, index: u64, label: &str) -> SimRng {
    SimRng::seed_from_u64(child_seed(master, index, label))
}
