//! Seeding and stream derivation.
//!
//! Every run is driven by a single `u64` seed. Replica streams are derived
//! from `(base_seed, n, rep)` with a SplitMix64 finaliser so that the seed of
//! a replica does not depend on scheduling or on the other replicas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic component.
pub type SimRng = ChaCha8Rng;

/// Name written to run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seeded via seed_from_u64";

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `rep` at population size `n`.
pub fn derive_seed(base_seed: u64, n: u64, rep: u64) -> u64 {
    let a = splitmix64(base_seed);
    let b = splitmix64(a ^ n);
    splitmix64(b ^ rep.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
