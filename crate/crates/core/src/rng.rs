//! Deterministic seed derivation.
//!
//! Every random stream in a run is derived from the master seed, so results
//! are reproducible regardless of how chains are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// One step of the SplitMix64 output function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a domain tag and a byte string into a master seed.
pub fn derive_seed(master: u64, tag: u64, bytes: &[u8]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(tag));
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        h = splitmix64(h ^ u64::from_le_bytes(word));
    }
    splitmix64(h ^ bytes.len() as u64)
}

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChainRng::seed_from_u64(seed)
}

pub(crate) const TAG_CHAIN: u64 = 1;
pub(crate) const TAG_NORMALIZING_CONSTANT: u64 = 2;
pub(crate) const TAG_ESTIMATOR: u64 = 3;
