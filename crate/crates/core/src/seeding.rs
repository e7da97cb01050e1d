//! Seed derivation for reproducible sub-streams.
//!
//! Every randomized stage derives its own seed from the experiment master
//! seed plus a stage tag, so adding or reordering stages never shifts the
//! random stream of an unrelated one.

/// splitmix64 finalizer; good avalanche, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` for the stage named `tag` at `index`.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h = mix(master);
    for &b in tag.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}
