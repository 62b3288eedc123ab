//! Deterministic seeding.
//!
//! Every stochastic stage draws from a `ChaCha8Rng`. Parallel tasks never share a
//! generator: each task derives its own seed with [`mix_seed`], a SplitMix64 finaliser
//! over `base ^ golden * (stream + 1)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives an independent per-task seed from a base seed and a stream index.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ GOLDEN.wrapping_mul(stream.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(base, stream))
}
