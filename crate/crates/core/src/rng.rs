//! Seed derivation. Every trial, press and calibration draws from its own
//! generator keyed by (campaign seed, stream, index), so results do not
//! depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream identifiers; distinct streams never share generator state.
pub mod stream {
    pub const PULL_TEST: u64 = 1;
    pub const BASELINE: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const RECOGNITION: u64 = 4;
    pub const SCAN: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn derive_rng(seed: u64, stream: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}
