//! Counter-based reproducible randomness.
//!
//! Every Monte Carlo trial derives its own generator from
//! `(master seed, trial index, domain tag)`, so results are independent of
//! scheduling and thread count.

use crate::scalar::{Scalar, C};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Domain tags separating the random streams inside one trial.
#[derive(Copy, Clone, Debug)]
pub enum Stream {
    Channel = 1,
    Frame = 2,
    Noise = 3,
    Jammer = 4,
    JlSimo = 5,
    Sample = 6,
}

/// SplitMix64 finalizer; decorrelates consecutive counters.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a counter.
pub fn mix(seed: u64, counter: u64) -> u64 {
    splitmix64(seed ^ splitmix64(counter.wrapping_add(0x517c_c1b7_2722_0a95)))
}

/// RNG for one (trial, stream) pair under a master seed.
pub fn trial_rng(master_seed: u64, trial: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(master_seed, trial), stream as u64))
}

/// Standard circularly-symmetric complex Gaussian CN(0, 1):
/// real and imaginary parts are N(0, 1/2).
pub fn cn01<T: Scalar>(rng: &mut impl Rng) -> C<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C::new(T::c(re * s), T::c(im * s))
}
