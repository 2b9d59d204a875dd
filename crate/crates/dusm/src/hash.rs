//! Seeded 64-bit mixing hash used everywhere a deterministic, uniform,
//! platform-independent choice is needed (ECMP next hops, packet-to-tree
//! matching, baseline rendezvous points). Not a cryptographic hash.

/// SplitMix64 finalizer. Full-avalanche mix of a single word.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one hash value. The result depends on
/// order, so `stable_hash(&[a, b])` and `stable_hash(&[b, a])` differ.
pub fn stable_hash(parts: &[u64]) -> u64 {
    let mut h = 0u64;
    for &p in parts {
        h = mix64(h ^ p);
    }
    h
}
