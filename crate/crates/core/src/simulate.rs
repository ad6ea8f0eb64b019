//! Exact-in-distribution sample paths on the uniform grid `j/n`, `j = 0..n`.
//!
//! Two samplers are provided:
//!
//! * [`CirculantSampler`] synthesizes fractional Gaussian noise by circulant
//!   embedding of its autocovariance and integrates it into an fBm path. Only
//!   fBm has stationary increments, so this route is fBm-only.
//! * [`CholeskySampler`] factors the full covariance matrix of
//!   `(V(1/n), ..., V(1))` and works for every family.
//!
//! Both draw their normals from an [`RngStream`], so a path is a pure function
//! of `(spec, n, master_seed, stream_index)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use log::warn;
use nalgebra::DMatrix;
use once_cell::sync::Lazy;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::kernels::{cov_matrix, fgn_autocov, Family, KernelSpec};
use crate::rng::RngStream;

/// Observed or simulated values `V(j/n)` for `j = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub n: usize,
    pub values: Vec<f64>,
    /// Generating model; `None` for ingested data.
    pub spec: Option<KernelSpec>,
    pub seed: Option<RngStream>,
}

impl SamplePath {
    /// Wraps observed values `V(1/n), ..., V(1)`; the origin slot is set to 0.
    pub fn from_observations(observations: &[f64]) -> Result<Self> {
        if observations.len() < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 observations, got {}",
                observations.len()
            )));
        }
        if let Some(bad) = observations.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite observation {bad}")));
        }
        let mut values = Vec::with_capacity(observations.len() + 1);
        values.push(0.0);
        values.extend_from_slice(observations);
        Ok(SamplePath {
            n: observations.len(),
            values,
            spec: None,
            seed: None,
        })
    }

    /// Builds a path from all `n + 1` grid values, origin included.
    pub fn from_grid_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::Argument(format!(
                "a path needs at least 3 grid values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("non-finite path value {bad}")));
        }
        Ok(SamplePath {
            n: values.len() - 1,
            values,
            spec: None,
            seed: None,
        })
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n as f64;
        (0..=self.n).map(move |j| j as f64 / n)
    }

    /// The same path with every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> SamplePath {
        SamplePath {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    /// Circulant embedding for fBm, Cholesky for the rest.
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Backend::Auto),
            "cholesky" => Ok(Backend::Cholesky),
            "circulant" => Ok(Backend::Circulant),
            other => Err(Error::Argument(format!(
                "unknown backend `{other}` (expected auto, cholesky or circulant)"
            ))),
        }
    }
}

/// A prepared sampler for one `(spec, n)` configuration.
#[derive(Clone)]
pub enum Sampler {
    Circulant(Arc<CirculantSampler>),
    Cholesky(Arc<CholeskySampler>),
}

impl Sampler {
    pub fn new(spec: &KernelSpec, n: usize, backend: Backend) -> Result<Self> {
        let circulant = match backend {
            Backend::Auto => spec.family() == Family::Fbm,
            Backend::Circulant => {
                if spec.family() != Family::Fbm {
                    return Err(Error::Argument(format!(
                        "circulant embedding needs stationary increments; {spec} has none"
                    )));
                }
                true
            }
            Backend::Cholesky => false,
        };
        if circulant {
            Ok(Sampler::Circulant(Arc::new(CirculantSampler::new(
                spec.h(),
                spec.sigma2(),
                n,
            )?)))
        } else {
            Ok(Sampler::Cholesky(cached_cholesky(spec, n)?))
        }
    }

    pub fn sample(&self, rng: RngStream) -> SamplePath {
        match self {
            Sampler::Circulant(c) => c.sample(rng),
            Sampler::Cholesky(c) => c.sample(rng),
        }
    }
}

/// Circulant-embedding (Wood–Chan / Davies–Harte) sampler for fBm.
pub struct CirculantSampler {
    spec: KernelSpec,
    n: usize,
    /// sqrt(λ_k / m) for the embedded circulant's eigenvalues.
    scales: Vec<f64>,
    clipped_mass: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl CirculantSampler {
    pub fn new(h: f64, sigma2: f64, n: usize) -> Result<Self> {
        let spec = KernelSpec::fbm(h, sigma2)?;
        if n < 2 {
            return Err(Error::Argument(format!(
                "grid size n = {n} must be at least 2"
            )));
        }
        let m = (2 * (n - 1)).next_power_of_two();
        let half = m / 2;

        let mut row: Vec<Complex<f64>> = (0..m)
            .map(|j| {
                let lag = if j <= half { j } else { m - j };
                Complex::new(fgn_autocov(h, sigma2, lag as u64, n), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m);
        fft.process(&mut row);

        let max_eig = row.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let mut clipped_mass = 0.0;
        let scales = row
            .iter()
            .map(|c| {
                let lambda = c.re;
                if lambda < 0.0 {
                    if -lambda > 1e-10 * max_eig {
                        clipped_mass += -lambda;
                    }
                    0.0
                } else {
                    (lambda / m as f64).sqrt()
                }
            })
            .collect();
        if clipped_mass > 0.0 {
            warn!(
                "circulant embedding for fbm(H={h}) n={n}: clipped negative eigenvalue mass {clipped_mass:e}"
            );
        }
        Ok(CirculantSampler {
            spec,
            n,
            scales,
            clipped_mass,
            fft,
        })
    }

    pub fn embedding_size(&self) -> usize {
        self.scales.len()
    }

    /// Total magnitude of negative eigenvalues set to zero (0 when exact).
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    /// One draw of the `n` fractional Gaussian noise increments.
    pub fn sample_noise(&self, rng: RngStream) -> Vec<f64> {
        let m = self.scales.len();
        let half = m / 2;
        let mut normals = rng.generator();
        let mut w = vec![Complex::new(0.0, 0.0); m];
        w[0] = Complex::new(self.scales[0] * normals.normal(), 0.0);
        w[half] = Complex::new(self.scales[half] * normals.normal(), 0.0);
        let pair_scale = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..half {
            let re = normals.normal();
            let im = normals.normal();
            let s = self.scales[k] * pair_scale;
            w[k] = Complex::new(s * re, s * im);
            w[m - k] = w[k].conj();
        }
        self.fft.process(&mut w);
        w.iter().take(self.n).map(|c| c.re).collect()
    }

    pub fn sample(&self, rng: RngStream) -> SamplePath {
        let noise = self.sample_noise(rng);
        let mut values = Vec::with_capacity(self.n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for x in noise {
            acc += x;
            values.push(acc);
        }
        SamplePath {
            n: self.n,
            values,
            spec: Some(self.spec),
            seed: Some(rng),
        }
    }
}

pub fn simulate_fbm_circulant(h: f64, sigma2: f64, n: usize, rng: RngStream) -> Result<SamplePath> {
    Ok(CirculantSampler::new(h, sigma2, n)?.sample(rng))
}

/// Relative diagonal jitter tried in order before giving up on a factorization.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Exact sampler from the lower Cholesky factor of the grid covariance.
pub struct CholeskySampler {
    spec: KernelSpec,
    n: usize,
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CholeskySampler {
    pub fn new(spec: &KernelSpec, n: usize) -> Result<Self> {
        let cov = cov_matrix(spec, n)?.into_matrix();
        let mean_diag = cov.diagonal().mean();
        for &delta in &JITTER_LADDER {
            let mut m = cov.clone();
            let add = delta * mean_diag;
            if add > 0.0 {
                for i in 0..n {
                    m[(i, i)] += add;
                }
            }
            if let Some(chol) = m.cholesky() {
                return Ok(CholeskySampler {
                    spec: *spec,
                    n,
                    lower: chol.unpack(),
                    jitter: add,
                });
            }
        }
        Err(Error::Simulation(format!(
            "Cholesky factorization of the {spec} covariance on n = {n} failed at every jitter level"
        )))
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Absolute diagonal jitter that was needed (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn sample(&self, rng: RngStream) -> SamplePath {
        let z = rng.generator().normals(self.n);
        let mut values = vec![0.0; self.n + 1];
        let out = &mut values[1..];
        for (col, &zk) in z.iter().enumerate() {
            let column = self.lower.column(col);
            for row in col..self.n {
                out[row] += column[row] * zk;
            }
        }
        SamplePath {
            n: self.n,
            values,
            spec: Some(self.spec),
            seed: Some(rng),
        }
    }
}

type FactorKey = (Family, u64, u64, u64, usize);

const FACTOR_CACHE_CAPACITY: usize = 32;

static FACTOR_CACHE: Lazy<RwLock<HashMap<FactorKey, Arc<CholeskySampler>>>> =
    Lazy::new(|| RwLock::new(HashMap::new()));

fn cached_cholesky(spec: &KernelSpec, n: usize) -> Result<Arc<CholeskySampler>> {
    let key = (
        spec.family(),
        spec.h().to_bits(),
        spec.k().to_bits(),
        spec.sigma2().to_bits(),
        n,
    );
    if let Some(hit) = FACTOR_CACHE
        .read()
        .expect("factor cache poisoned")
        .get(&key)
    {
        return Ok(Arc::clone(hit));
    }
    let sampler = Arc::new(CholeskySampler::new(spec, n)?);
    let mut cache = FACTOR_CACHE.write().expect("factor cache poisoned");
    if cache.len() >= FACTOR_CACHE_CAPACITY {
        cache.clear();
    }
    Ok(Arc::clone(cache.entry(key).or_insert(sampler)))
}

/// Samples `V(j/n)` by Cholesky factorization of the covariance matrix.
/// Factors are cached per `(spec, n)`.
pub fn simulate_cholesky(spec: &KernelSpec, n: usize, rng: RngStream) -> Result<SamplePath> {
    Ok(cached_cholesky(spec, n)?.sample(rng))
}

/// Samples with the family's default backend.
pub fn simulate(spec: &KernelSpec, n: usize, rng: RngStream) -> Result<SamplePath> {
    Ok(Sampler::new(spec, n, Backend::Auto)?.sample(rng))
}
