//! Seed derivation and per-purpose random streams.
//!
//! Every stochastic stage draws from its own ChaCha8 stream keyed by a
//! 64-bit seed and a stage tag, so results depend only on `(inputs, seed)`
//! and never on scheduling or on how many other stages consumed randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stage tags for [`stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Incidence = 1,
    Vegetation = 2,
    Decorrelation = 3,
    Speckle = 4,
    Texture = 5,
    Noise = 6,
    Coregistration = 7,
    PhaseScreen = 8,
    AeInit = 9,
    AeBatches = 10,
    AeTiles = 11,
    Calibration = 12,
    Bootstrap = 13,
    TrialSeed = 14,
    Holdout = 15,
}

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a tag.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Random stream for one stage of a computation keyed by `seed`.
pub fn stream(seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64);
    rng
}

/// Random stream for sub-item `index` (e.g. one look) of a stage.
pub fn substream(seed: u64, stage: Stage, index: u64) -> ChaCha8Rng {
    stream(derive_seed(seed, index.wrapping_add(1)), stage)
}
