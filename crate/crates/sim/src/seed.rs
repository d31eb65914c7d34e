//! Counter-based per-run seeds, so run `i` of a sweep can be replayed alone.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` derived from the sweep's base seed.
pub fn run_seed(base: u64, index: u64) -> u64 {
    mix(mix(base).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}
