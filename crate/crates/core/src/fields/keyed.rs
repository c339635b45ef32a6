//! Counter-based keying of random streams by (seed, lattice cell).

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream key for a lattice cell. Distinct cells give unrelated keys.
pub fn cell_key(seed: u64, cell: [i64; 3]) -> u64 {
    let mut h = mix64(seed ^ 0x5151_7a3c_2d1e_0f99);
    for c in cell {
        h = mix64(h ^ (c as u64));
    }
    h
}

/// Uniform sample in [0, 1) from a key.
pub fn unit_from_key(key: u64) -> f64 {
    (mix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
