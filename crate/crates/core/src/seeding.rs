//! Pinned RNG algorithm and seed derivation for replicas and trials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Identifier written into graph headers and experiment records.
pub const RNG_ALGORITHM: &str = "chacha8-rand_chacha0.3-seed_from_u64";

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

// splitmix64 finalizer
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `seed_i = hash(base, i)`: folds each index into the running state with splitmix64.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(mix64(base), |acc, &i| mix64(acc ^ mix64(i)))
}
