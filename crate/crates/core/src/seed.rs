//! Deterministic derivation of independent RNG streams.
//!
//! Every random draw in the workspace flows from a single user seed through
//! `mix`, keyed by a purpose tag (and, where needed, a trial or subcarrier
//! index). Streams derived this way are stable across thread counts and
//! platforms, which is what makes reruns byte-identical.

/// Purpose tags for the independent streams hanging off one scenario seed.
pub mod tags {
    pub const PRECODER: u64 = 0x01;
    pub const SYMBOLS: u64 = 0x02;
    pub const COMBINER: u64 = 0x03;
    pub const REFLECTIONS: u64 = 0x04;
    pub const NOISE: u64 = 0x05;
    pub const TARGETS: u64 = 0x06;
    pub const TRIAL: u64 = 0x07;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a stream key.
pub fn mix(seed: u64, key: u64) -> u64 {
    splitmix64(seed ^ splitmix64(key))
}

/// Derive a child seed keyed by both a tag and an index (subcarrier, trial).
pub fn mix2(seed: u64, tag: u64, index: u64) -> u64 {
    mix(seed, tag.wrapping_mul(0x9E37_79B9).wrapping_add(index))
}
