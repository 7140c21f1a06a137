//! Seeded random streams.
//!
//! Every invocation owns one 64-bit seed; independent streams (one per trial,
//! one per generator) are split off with a SplitMix64 step and fed to ChaCha8.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 output for `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream number `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Uniform draw in `(0, 1]`.
pub fn open_unit<R: rand::Rng>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}
