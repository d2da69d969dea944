//! Deterministic derivation of child seeds from a master seed.
//!
//! `derive_seed(seed, stream)` runs the splitmix64 finalizer on
//! `seed + (stream + 1) * 0x9E3779B97F4A7C15` (wrapping). Repetition `r`
//! of an experiment uses `derive_seed(seed, r)`; fold `f` of that
//! repetition uses `derive_seed(repetition_seed, f)`, and so on.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}
