//! Seeded random streams.
//!
//! Every stochastic routine draws from a ChaCha20 generator keyed by the
//! 64-bit run seed. Independent consumers (input laws, permutations, chains,
//! lattice boundaries) take disjoint stream indices of the same key, so a
//! run is bit-reproducible and adding a consumer never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Generator for stream `stream` under key `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed for job `index` so that nested jobs get their own
/// key space (splitmix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
