//! Simulation of self-similar Gaussian processes (fBm, sub-, bi- and
//! trifractional Brownian motion) and estimation of their self-similarity
//! index through modified Lamperti transformations.
//!
//! ```no_run
//! use lamperti::{estimate, rng::RngStream, simulate};
//!
//! let path = simulate::simulate_fbm_circulant(0.7, 1.0, 1024, RngStream::new(42, 0)).unwrap();
//! let fit = estimate::estimate_known_sigma(&path, 1.0).unwrap();
//! println!("H = {}", fit.index_estimate);
//! ```

// Negated comparisons are how NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod lamperti;
pub mod numeric;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use kernels::{Family, KernelSpec};
pub use rng::RngStream;
pub use simulate::SamplePath;
