//! Core machinery for testing the validity of independent component models.
//!
//! An independent component model assumes the observed vector decomposes as
//! `X = mu + Omega * Z` with `Z` having totally independent components. This
//! crate estimates the unmixing matrix (FOBI, JADE, symmetric FastICA),
//! computes characteristic-function L2 statistics on the estimated residuals
//! or their scored ranks, and calibrates the test by columnwise permutation
//! or bootstrap resampling. Samplers for the standard simulation settings and
//! AR prewhitening for serially dependent components are included.
//!
//! The crate is `no_std` (with `alloc`); file formats, CLI, and the parallel
//! drivers live in the companion `icmtest` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod ica;
pub mod linalg;
pub mod mat;
mod math;
pub mod resampling;
pub mod rng;
pub mod stats;

pub use mat::Mat;
