//! Reproducible, independently addressable random substreams.
//!
//! A stream is identified by `(master_seed, stream_index)`. The generator is
//! ChaCha12 keyed by the master seed with the stream index as the ChaCha
//! stream id, so every substream is a disjoint counter range of the same
//! keyed block function and can be created in any order on any thread.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    /// The stream `offset` positions further along the same master seed.
    pub fn offset(&self, offset: u64) -> Self {
        RngStream {
            master_seed: self.master_seed,
            stream_index: self.stream_index.wrapping_add(offset),
        }
    }

    pub fn generator(&self) -> NormalSource {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        NormalSource {
            rng,
            standard: Normal::standard(),
        }
    }
}

/// Standard normal variates by inverse-CDF transform of open-interval uniforms.
pub struct NormalSource {
    rng: ChaCha12Rng,
    standard: Normal,
}

impl NormalSource {
    /// Uniform on (0, 1): the top 53 bits shifted to the cell midpoint.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u = self.uniform();
        self.standard.inverse_cdf(u)
    }

    pub fn normals(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| self.normal()).collect()
    }
}
