//! Reproducible random streams.
//!
//! Every Monte Carlo replica draws from its own ChaCha8 stream: the key comes
//! from the run seed and the 64-bit stream id is the replica index. ChaCha is
//! counter based, so replica `i` produces the same numbers whether replicas
//! run on one thread or many, and in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Generator for replica `replica` of the run identified by `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Derives an independent sub-seed, e.g. one per experiment in a suite.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
#[inline]
pub fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Exponential variate with the given rate, by inversion.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -uniform_open(rng).ln() / rate
}
