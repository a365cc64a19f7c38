//! Deterministic random streams.
//!
//! Every random quantity in a simulation is drawn from a ChaCha stream whose
//! seed is derived from the master seed and a tuple of integer keys (run
//! index, measurement kind, satellite, epoch...). Draws therefore do not
//! depend on evaluation order or on which other quantities were simulated.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use rand_chacha::ChaCha8Rng as Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Hashes a master seed and a key path into a child seed.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019))))
}

pub fn rng_for(master: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, keys))
}

/// One standard-normal draw addressed by `(master, keys)`.
pub fn keyed_normal(master: u64, keys: &[u64]) -> f64 {
    standard_normal(&mut rng_for(master, keys))
}

pub fn standard_normal<R: rand_chacha::rand_core::RngCore>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
