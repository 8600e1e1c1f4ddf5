//! Counter-based seed derivation.
//!
//! All randomness in the crate flows from a single 64-bit master seed.
//! Independent streams (noise draws, experiment cells, test fixtures) derive
//! their own seed as `derive(master, counter)`, so parallel work is
//! reproducible regardless of scheduling order.

/// SplitMix64 finalizer. Good avalanche, cheap, stateless.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed for stream `counter` of a master seed.
pub fn derive(master: u64, counter: u64) -> u64 {
    splitmix64(master ^ splitmix64(counter))
}
