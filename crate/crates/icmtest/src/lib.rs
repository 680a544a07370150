//! IO, report formats, and parallel drivers around `icmtest-core`.
//!
//! The core crate is pure and single-threaded; this crate adds CSV/JSON
//! handling, wall-clock stamping, rayon fan-out over resampling replicates
//! and Monte Carlo replications, and the command-line interface.

pub mod io;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod sim;

pub use icmtest_core as core;
