//! Counter-based random streams.
//!
//! Every scenario draws from its own ChaCha stream `(seed, index)`, so a
//! scenario's primitives depend only on the seed and its index, never on
//! scheduling. Independent purposes (scenario draws, conditional resampling,
//! reference draws) use disjoint seeds derived with [`derive_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The RNG for stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a purpose tag into a seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub mod tags {
    pub const CONDITIONAL: u64 = 1;
    pub const REFERENCE: u64 = 2;
    pub const MEASURE: u64 = 3;
    pub const TEST_BANK: u64 = 4;
}
