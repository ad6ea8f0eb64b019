//! Parametric bootstrap bias correction.
//!
//! Given an estimate Ĥ on the data, paths are re-simulated from the fitted
//! model at Ĥ and re-estimated; the mean shift of the re-estimates measures
//! the estimator bias and `H_BC = 2Ĥ − mean(Ĥ*)` removes it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::Estimator;
use crate::kernels::{Family, KernelSpec};
use crate::lamperti::build_subsample;
use crate::rng::RngStream;
use crate::simulate::{Backend, SamplePath, Sampler};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Resampling model. For the two-parameter families the fitted index is split
/// as `H = index / K` with `K` held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BootstrapModel {
    Fbm,
    Sfbm,
    Bfbm { k: f64 },
    Tfbm { k: f64 },
}

impl BootstrapModel {
    pub fn family(&self) -> Family {
        match self {
            BootstrapModel::Fbm => Family::Fbm,
            BootstrapModel::Sfbm => Family::Sfbm,
            BootstrapModel::Bfbm { .. } => Family::Bfbm,
            BootstrapModel::Tfbm { .. } => Family::Tfbm,
        }
    }

    /// Unit-scale kernel with self-similarity index `index`.
    fn unit_spec(&self, index: f64) -> Result<KernelSpec> {
        match *self {
            BootstrapModel::Fbm => KernelSpec::fbm(index, 1.0),
            BootstrapModel::Sfbm => KernelSpec::sfbm(index, 1.0),
            BootstrapModel::Bfbm { k } => KernelSpec::bfbm(index / k, k, 1.0),
            BootstrapModel::Tfbm { k } => KernelSpec::tfbm(index / k, k, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub h_raw: f64,
    pub h_bias_corrected: f64,
    pub replicates: usize,
    pub bootstrap_mean: f64,
    pub bootstrap_sd: f64,
    /// Model the replicates were drawn from.
    pub model: KernelSpec,
    /// Replicate estimates in replicate order (failed replicates omitted).
    pub estimates: Vec<f64>,
    pub failed_streams: Vec<u64>,
}

/// Second-moment fit of `Var(V(1))`: mean of `(a_j b_j^Ĥ)²`.
pub fn fit_sigma2(path: &SamplePath, h: f64) -> Result<f64> {
    let sub = build_subsample(path)?;
    let s = sub
        .a
        .iter()
        .enumerate()
        .map(|(j, &a)| a * a * sub.b_pow(j, 2.0 * h))
        .sum::<f64>()
        / sub.len() as f64;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::DegenerateInput(format!(
            "second moment of the stationary series is {s}"
        )));
    }
    Ok(s)
}

pub fn bias_correct(
    path: &SamplePath,
    estimator: Estimator,
    model: BootstrapModel,
    replicates: usize,
    rng: RngStream,
) -> Result<BootstrapResult> {
    bias_correct_with(
        path,
        &|p: &SamplePath| Ok(estimator.estimate(p)?.index_estimate),
        model,
        replicates,
        rng,
    )
}

/// Bias correction for an arbitrary index estimator. Replicate `r`
/// (1-based) uses stream `rng.offset(r)`.
pub fn bias_correct_with<E>(
    path: &SamplePath,
    estimator: &E,
    model: BootstrapModel,
    replicates: usize,
    rng: RngStream,
) -> Result<BootstrapResult>
where
    E: Fn(&SamplePath) -> Result<f64> + Sync,
{
    if replicates < 2 {
        return Err(Error::Argument(format!(
            "bootstrap needs at least 2 replicates, got {replicates}"
        )));
    }
    let h_raw = estimator(path)?;
    let unit = model.unit_spec(h_raw)?;
    let var_fit = fit_sigma2(path, h_raw)?;
    let spec = unit.with_sigma2(var_fit / unit.variance_at_one())?;
    let sampler = Sampler::new(&spec, path.n, Backend::Auto)?;

    let outcomes: Vec<(u64, Option<f64>)> = (1..=replicates as u64)
        .into_par_iter()
        .map(|r| {
            let stream = rng.offset(r);
            let replicate = sampler.sample(stream);
            (
                stream.stream_index,
                estimator(&replicate).ok().filter(|h| h.is_finite()),
            )
        })
        .collect();

    let failed_streams: Vec<u64> = outcomes
        .iter()
        .filter(|(_, h)| h.is_none())
        .map(|(s, _)| *s)
        .collect();
    if failed_streams.len() as f64 > MAX_FAILURE_FRACTION * replicates as f64 {
        return Err(Error::Bootstrap {
            replicates,
            failed_streams,
        });
    }
    let estimates: Vec<f64> = outcomes.into_iter().filter_map(|(_, h)| h).collect();
    let m = estimates.len() as f64;
    let bootstrap_mean = estimates.iter().sum::<f64>() / m;
    let bootstrap_sd = if estimates.len() > 1 {
        (estimates
            .iter()
            .map(|h| (h - bootstrap_mean).powi(2))
            .sum::<f64>()
            / (m - 1.0))
            .sqrt()
    } else {
        0.0
    };
    Ok(BootstrapResult {
        h_raw,
        h_bias_corrected: 2.0 * h_raw - bootstrap_mean,
        replicates,
        bootstrap_mean,
        bootstrap_sd,
        model: spec,
        estimates,
        failed_streams,
    })
}
