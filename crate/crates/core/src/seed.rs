//! Counter-based seed derivation.
//!
//! Every random stream in the pipeline is keyed by a path of integers
//! (iteration, target, candidate, stream tag, ...) folded into the run seed
//! with a SplitMix64 finalizer. Streams never depend on evaluation order, so
//! parallel fan-out cannot change results.

/// Stream tags used as the last path element when deriving seeds.
pub mod stream {
    pub const PROPOSE: u64 = 0x5052_4f50;
    pub const SCORE: u64 = 0x5343_4f52;
    pub const PAIRS: u64 = 0x5041_4952;
    pub const MUTATE: u64 = 0x4d55_5441;
    pub const EXPAND: u64 = 0x4558_5041;
    pub const DIVERSIFY: u64 = 0x4449_5645;
    pub const TARGETS: u64 = 0x5441_5247;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of counters.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// FNV-1a over a byte string. Stable across platforms and toolchains.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
