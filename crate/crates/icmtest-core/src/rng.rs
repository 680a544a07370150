//! Seeded randomness.
//!
//! Everything random in this crate flows through a [`RngStream`]: a ChaCha
//! generator addressed by `(seed, replicate index, role)`. Replicates of a
//! resampling scheme or a Monte Carlo study each get their own counter-indexed
//! stream, so results are independent of evaluation order and thread
//! scheduling.
//!
//! The samplers favor exact constructions (inverse CDF, Box-Muller,
//! Marsaglia-Tsang) over speed.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_core::{RngCore, SeedableRng};

use crate::math;

pub type Rng = rand_chacha::ChaCha8Rng;

/// Stream roles; combined with a replicate index they address a unique
/// substream of a seed.
pub mod role {
    pub const ROOT: u64 = 0;
    pub const DATA: u64 = 1;
    pub const PERMUTATION: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const ICA: u64 = 4;
}

/// Factory for deterministic ChaCha substreams of a single 64-bit seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        RngStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The root stream of this seed.
    pub fn rng(&self) -> Rng {
        self.stream(0, role::ROOT)
    }

    /// Stream for replicate `index` under `role`. Indices up to `2^56` are
    /// distinct across roles.
    pub fn stream(&self, index: u64, role: u64) -> Rng {
        let mut rng = Rng::seed_from_u64(self.seed);
        rng.set_stream((index << 8) | (role & 0xff));
        rng
    }
}

/// Derives an independent 64-bit sub-seed (SplitMix64 of seed and index);
/// used to hand nested components their own stream universe.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in the open interval `(0, 1)`.
pub fn uniform_open01<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}

/// Uniform in `(0, 1]`; safe as an argument to `ln`.
pub fn uniform_open_closed01<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / 9007199254740992.0)
}

/// Standard normal via Box-Muller.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = uniform_open_closed01(rng);
    let u2 = uniform_open01(rng);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(2.0 * PI * u2)
}

/// Exponential with rate 1 by inverse CDF.
pub fn exponential<R: RngCore>(rng: &mut R) -> f64 {
    -math::ln(uniform_open_closed01(rng))
}

/// Gamma with the given shape and scale 1, by Marsaglia-Tsang squeeze
/// (with the `U^{1/a}` boost for shape below one).
pub fn gamma<R: RngCore>(rng: &mut R, shape: f64) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        let g = gamma(rng, shape + 1.0);
        let u = uniform_open_closed01(rng);
        return g * math::powf(u, 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / math::sqrt(9.0 * d);
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = uniform_open01(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if math::ln(u) < 0.5 * x2 + d * (1.0 - v + math::ln(v)) {
            return d * v;
        }
    }
}

/// Chi-square with (possibly non-integer) degrees of freedom.
pub fn chi_square<R: RngCore>(rng: &mut R, df: f64) -> f64 {
    2.0 * gamma(rng, df / 2.0)
}

/// Unbiased integer in `0..bound` (Lemire's multiply-shift rejection).
pub fn uniform_index<R: RngCore>(rng: &mut R, bound: usize) -> usize {
    debug_assert!(bound >= 1);
    let b = bound as u64;
    let threshold = b.wrapping_neg() % b;
    loop {
        let x = rng.next_u64();
        let m = (x as u128) * (b as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as usize;
        }
    }
}

/// Uniform random permutation of `0..n` by Fisher-Yates.
pub fn random_permutation<R: RngCore>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_index(rng, i + 1);
        perm.swap(i, j);
    }
    perm
}
