//! Episode seed derivation.
//!
//! `derive_seed(root, index, tag)` is
//!
//! ```text
//! h   = FNV-1a-64(tag bytes)
//! s   = splitmix64(root ^ h)
//! out = splitmix64(s ^ index)
//! ```
//!
//! where `splitmix64` is the standard finalizer with increment
//! `0x9E3779B97F4A7C15`. The mapping is part of the output format: changing
//! it changes every result file, so it is pinned by a test.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for episode `index` of purpose `tag` under `root`.
pub fn derive_seed(root: u64, index: u64, tag: &str) -> u64 {
    splitmix64(splitmix64(root ^ fnv1a(tag.as_bytes())) ^ index)
}

/// Purpose tags used by the harness.
pub mod tags {
    pub const SWEEP: &str = "sweep";
    pub const MATRIX: &str = "matrix";
    pub const EVALUATE: &str = "evaluate";
    pub const HEAL: &str = "heal";
    pub const SIMULATE: &str = "simulate";
    pub const ORACLE: &str = "oracle";
}
