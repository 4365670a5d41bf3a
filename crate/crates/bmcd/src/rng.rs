//! Seed derivation: every source of randomness in the crate is a ChaCha8
//! stream keyed by (master seed, domain, index), so a single master seed
//! reproduces a whole run and per-user/per-cluster streams stay independent
//! of thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed domain labels for the stream-splitting scheme.
pub mod domain {
    pub const INIT: u64 = 1;
    pub const TAU: u64 = 2;
    pub const CLUSTER: u64 = 3;
    pub const USER: u64 = 4;
    pub const SIMULATE: u64 = 5;
    pub const CLICKS: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const CF: u64 = 8;
    pub const KMEANS: u64 = 9;
    pub const PARTITION_MC: u64 = 10;
    pub const REPLICATE: u64 = 11;
    pub const CV: u64 = 12;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from (master, domain, index).
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    let mut state = master;
    let a = splitmix64(&mut state) ^ domain.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut state2 = a;
    let b = splitmix64(&mut state2) ^ index.wrapping_mul(0xA5A5_1937_8050_4F17);
    let mut state3 = b;
    splitmix64(&mut state3)
}

/// RNG for a derived stream.
pub fn stream_rng(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, index))
}
