//! Seed derivation. All randomness in the crate flows from a run seed through
//! [`derive_seed`], so any component can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into an independent sub-seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sub_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    rng(derive_seed(seed, stream, index))
}

// stream tags
pub const SPLIT: u64 = 1;
pub const REBALANCE: u64 = 2;
pub const SUBSAMPLE: u64 = 3;
pub const STRATIFIED: u64 = 4;
pub const SYNTH: u64 = 5;
pub const INIT: u64 = 6;
pub const SHUFFLE: u64 = 7;
pub const DROPOUT: u64 = 8;
pub const BOOTSTRAP: u64 = 9;
pub const SESSION: u64 = 10;
