//! Self-similarity index estimators built on the Lamperti subsampling.
//!
//! Every estimator here works on the exponentially subsampled series
//! `a_j = V(⌊n^{j/n}⌋/n)`, `b_j = n^{1 - j/n}` (see [`crate::lamperti`]),
//! except the quadratic-variations baseline which uses grid increments.
//!
//! * [`estimate_known_sigma`]: root in H of `mean_j a_j² b_j^{2H} = σ²`.
//! * [`estimate_kurtosis`]: argmin in H of the kurtosis statistic
//!   `(n+1) Σ a_j⁴ b_j^{4H} / (Σ a_j² b_j^{2H})²`; needs no variance.
//! * [`estimate_sfbm`]: as known-sigma with the sfBm target `2 − 2^{2H−1}`.
//! * [`estimate_tfbm`]: joint `(H, K)` fit of `mean_j a_j² b_j^{2HK} = 2 − 2^K`.
//! * [`estimate_qv`]: dyadic quadratic-variations ratio.
//!
//! Reported indices are rounded to [`REPORT_RESOLUTION`] so that inputs that
//! differ only by floating-point rounding (for instance a path multiplied by a
//! constant) yield identical estimates.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{Family, KernelSpec};
use crate::lamperti::{build_subsample, SubsampledSeries};
use crate::numeric::{halley_solve, scan_then_brent, Method, SolveReport};
use crate::simulate::SamplePath;

/// Grid resolution of reported estimates.
pub const REPORT_RESOLUTION: f64 = 1e-10;

/// Smallest path length accepted by the estimators.
pub const MIN_PATH_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    KnownSigma,
    Kurtosis,
    SfbmKnown,
    TfbmKnown,
    Qv,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::KnownSigma,
        Algorithm::Kurtosis,
        Algorithm::SfbmKnown,
        Algorithm::TfbmKnown,
        Algorithm::Qv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KnownSigma => "known-sigma",
            Algorithm::Kurtosis => "kurtosis",
            Algorithm::SfbmKnown => "sfbm",
            Algorithm::TfbmKnown => "tfbm",
            Algorithm::Qv => "qv",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "unknown algorithm `{key}` (expected known-sigma, kurtosis, sfbm, tfbm or qv)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Ĥ, or Ĥ·K̂ for the two-parameter fit.
    pub index_estimate: f64,
    pub h_component: Option<f64>,
    pub k_component: Option<f64>,
    pub algorithm: Algorithm,
    pub report: SolveReport,
    pub warnings: Vec<String>,
    /// tfBm only: `(H, K)` pairs on the zero-residual curve, one per grid K.
    pub solution_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub root_tol: f64,
    pub min_tol: f64,
    /// Root brackets are `(ε, 1 − ε)`.
    pub root_eps: f64,
    /// Minimization intervals are `(ε, 1 − ε)`.
    pub min_eps: f64,
    pub scan_points: usize,
    /// Grid size per axis for the tfBm `(H, K)` search.
    pub tfbm_grid: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            root_tol: 1e-13,
            min_tol: crate::numeric::DEFAULT_MIN_TOL,
            root_eps: 1e-6,
            min_eps: 1e-4,
            scan_points: 101,
            tfbm_grid: 99,
        }
    }
}

fn quantize(x: f64) -> f64 {
    (x / REPORT_RESOLUTION).round() * REPORT_RESOLUTION
}

fn check_len(path: &SamplePath) -> Result<()> {
    if path.n < MIN_PATH_LEN {
        return Err(Error::Argument(format!(
            "estimation needs a path with n >= {MIN_PATH_LEN}, got n = {}",
            path.n
        )));
    }
    Ok(())
}

/// `(S(x), S'(x), S''(x))` for `S(x) = mean_j a_j² b_j^{2x}`.
fn mean_square_moment(sub: &SubsampledSeries, x: f64) -> (f64, f64, f64) {
    let mut s = 0.0;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (j, &a) in sub.a.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let term = a * a * sub.b_pow(j, 2.0 * x);
        let l = 2.0 * sub.ln_b(j);
        s += term;
        d1 += term * l;
        d2 += term * l * l;
    }
    let m = sub.len() as f64;
    (s / m, d1 / m, d2 / m)
}

/// `f_n(H) = (1/(n+1)) Σ_j a_j² b_j^{2H} − σ²`.
pub fn f_known_sigma(sub: &SubsampledSeries, h: f64, sigma2: f64) -> f64 {
    mean_square_moment(sub, h).0 - sigma2
}

/// `f_n` together with its first and second H-derivatives.
pub fn f_known_sigma_derivs(sub: &SubsampledSeries, h: f64, sigma2: f64) -> (f64, f64, f64) {
    let (s, d1, d2) = mean_square_moment(sub, h);
    (s - sigma2, d1, d2)
}

/// Solves an increasing equation on `(ε, 1 − ε)`; without a sign change the
/// endpoint with the smaller residual is returned with a boundary warning.
fn solve_increasing<F>(
    g: F,
    config: &EstimatorConfig,
    algorithm: Algorithm,
    what: &str,
) -> Result<EstimateResult>
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let bracket = (config.root_eps, 1.0 - config.root_eps);
    match halley_solve(&g, bracket, config.root_tol) {
        Ok(report) => Ok(EstimateResult {
            index_estimate: quantize(report.root_or_argmin),
            h_component: None,
            k_component: None,
            algorithm,
            report,
            warnings: Vec::new(),
            solution_curve: Vec::new(),
        }),
        Err(Error::NoSignChange { lo, hi, f_lo, f_hi }) => {
            if !(f_lo.is_finite() && f_hi.is_finite()) {
                return Err(Error::Estimation(format!(
                    "{what}: non-finite objective at the bracket ends"
                )));
            }
            let (x, fx) = if f_lo.abs() <= f_hi.abs() {
                (lo, f_lo)
            } else {
                (hi, f_hi)
            };
            Ok(EstimateResult {
                index_estimate: quantize(x),
                h_component: None,
                k_component: None,
                algorithm,
                report: SolveReport {
                    root_or_argmin: x,
                    iterations: 0,
                    residual: Some(fx.abs()),
                    value: fx,
                    method: Method::Halley,
                    bracket,
                },
                warnings: vec![format!(
                    "boundary: {what} has no root in ({lo}, {hi}); f = {f_lo:e} .. {f_hi:e}"
                )],
                solution_curve: Vec::new(),
            })
        }
        Err(e) => Err(e),
    }
}

pub fn estimate_known_sigma(path: &SamplePath, sigma2: f64) -> Result<EstimateResult> {
    estimate_known_sigma_with(path, sigma2, &EstimatorConfig::default())
}

pub fn estimate_known_sigma_with(
    path: &SamplePath,
    sigma2: f64,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    check_len(path)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "sigma2 = {sigma2} must be positive and finite"
        )));
    }
    let sub = build_subsample(path)?;
    solve_increasing(
        |h| f_known_sigma_derivs(&sub, h, sigma2),
        config,
        Algorithm::KnownSigma,
        "known-sigma equation",
    )
}

/// Kurtosis statistic `(n+1) Σ a_j⁴ b_j^{4H} / (Σ a_j² b_j^{2H})²`.
pub fn kurtosis_stat(sub: &SubsampledSeries, h: f64) -> Result<f64> {
    let scale = sub.a.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::DegenerateInput(
            "kurtosis statistic of an all-zero subsample".into(),
        ));
    }
    Ok(kurtosis_normalized(sub, scale, h).0)
}

// (κ, d/dH ln κ) on a / scale.
fn kurtosis_normalized(sub: &SubsampledSeries, scale: f64, h: f64) -> (f64, f64) {
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    let mut d2 = 0.0;
    let mut d4 = 0.0;
    for (j, &a) in sub.a.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let x = a / scale;
        let sq = x * x * sub.b_pow(j, 2.0 * h);
        let quad = sq * sq;
        let l = sub.ln_b(j);
        s2 += sq;
        s4 += quad;
        d2 += 2.0 * l * sq;
        d4 += 4.0 * l * quad;
    }
    let kappa = sub.len() as f64 * s4 / (s2 * s2);
    (kappa, d4 / s4 - 2.0 * d2 / s2)
}

pub fn estimate_kurtosis(path: &SamplePath) -> Result<EstimateResult> {
    estimate_kurtosis_with(path, &EstimatorConfig::default())
}

pub fn estimate_kurtosis_with(
    path: &SamplePath,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    check_len(path)?;
    let observed = &path.values[1..];
    if observed.iter().all(|&v| v == observed[0]) {
        return Err(Error::DegenerateInput(
            "constant path: the kurtosis objective decreases to the boundary".into(),
        ));
    }
    let sub = build_subsample(path)?;
    let scale = sub.a.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if scale == 0.0 {
        return Err(Error::DegenerateInput(
            "all subsampled values are zero".into(),
        ));
    }

    let interval = (config.min_eps, 1.0 - config.min_eps);
    let objective = |h: f64| kurtosis_normalized(&sub, scale, h).0;
    let mut report = scan_then_brent(objective, interval, config.scan_points, config.min_tol);

    // Brent stops at ~sqrt(eps) resolution; settle the stationary point by
    // bisection on d/dH ln κ so the result is reproducible far below the
    // reporting resolution.
    let x = report.root_or_argmin;
    let delta = 16.0 * config.min_tol;
    let lo = (x - delta).max(interval.0);
    let hi = (x + delta).min(interval.1);
    let slope = |h: f64| kurtosis_normalized(&sub, scale, h).1;
    if lo < hi && slope(lo) < 0.0 && slope(hi) > 0.0 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let polished = 0.5 * (a + b);
        report.root_or_argmin = polished;
        report.value = objective(polished);
    }

    let mut warnings = Vec::new();
    let x = report.root_or_argmin;
    if x - interval.0 <= 2.0 * config.min_tol || interval.1 - x <= 2.0 * config.min_tol {
        warnings.push(format!(
            "boundary: kurtosis minimum at H = {x} on the edge of ({}, {})",
            interval.0, interval.1
        ));
    }
    Ok(EstimateResult {
        index_estimate: quantize(x),
        h_component: None,
        k_component: None,
        algorithm: Algorithm::Kurtosis,
        report,
        warnings,
        solution_curve: Vec::new(),
    })
}

/// Target variance of sfBm at t = 1 for unit scale.
pub fn sfbm_unit_variance(h: f64) -> f64 {
    2.0 - 2f64.powf(2.0 * h - 1.0)
}

/// `g(H) = mean a² b^{2H} − σ²(2 − 2^{2H−1})` with derivatives.
pub fn f_sfbm_derivs(sub: &SubsampledSeries, h: f64, sigma2: f64) -> (f64, f64, f64) {
    let (s, d1, d2) = mean_square_moment(sub, h);
    let ln2 = std::f64::consts::LN_2;
    let p = 2f64.powf(2.0 * h - 1.0);
    (
        s - sigma2 * (2.0 - p),
        d1 + sigma2 * 2.0 * ln2 * p,
        d2 + sigma2 * 4.0 * ln2 * ln2 * p,
    )
}

/// sfBm estimator for unit scale σ² = 1.
pub fn estimate_sfbm(path: &SamplePath) -> Result<EstimateResult> {
    estimate_sfbm_scaled(path, 1.0, &EstimatorConfig::default())
}

/// sfBm estimator for a known kernel scale σ².
pub fn estimate_sfbm_scaled(
    path: &SamplePath,
    sigma2: f64,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    check_len(path)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "sigma2 = {sigma2} must be positive and finite"
        )));
    }
    let sub = build_subsample(path)?;
    solve_increasing(
        |h| f_sfbm_derivs(&sub, h, sigma2),
        config,
        Algorithm::SfbmKnown,
        "sfbm equation",
    )
}

/// `r(H, K) = mean a² b^{2HK} − σ²(2 − 2^K)`.
pub fn tfbm_residual(sub: &SubsampledSeries, h: f64, k: f64, sigma2: f64) -> f64 {
    mean_square_moment(sub, h * k).0 - sigma2 * (2.0 - 2f64.powf(k))
}

pub fn estimate_tfbm(path: &SamplePath) -> Result<EstimateResult> {
    estimate_tfbm_scaled(path, 1.0, &EstimatorConfig::default())
}

/// Joint `(H, K)` fit for tfBm with known kernel scale σ².
///
/// The single moment equation does not identify `(H, K)`: it holds along a
/// curve. The fit takes the grid point with the smallest squared residual
/// (ties go to the smallest K, then the smallest H), then solves the equation
/// in H exactly at that K.
pub fn estimate_tfbm_scaled(
    path: &SamplePath,
    sigma2: f64,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    check_len(path)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "sigma2 = {sigma2} must be positive and finite"
        )));
    }
    let sub = build_subsample(path)?;
    let g = config.tfbm_grid.max(2);
    let step = 1.0 / (g + 1) as f64;

    // S depends on (H, K) only through the product, so memoize by i·j.
    let mut moments: HashMap<usize, f64> = HashMap::new();
    let mut best: Option<(f64, usize, usize)> = None;
    for kj in 1..=g {
        let k = kj as f64 * step;
        let target = sigma2 * (2.0 - 2f64.powf(k));
        for hi in 1..=g {
            let s = *moments
                .entry(hi * kj)
                .or_insert_with(|| mean_square_moment(&sub, (hi * kj) as f64 * step * step).0);
            let r = s - target;
            let r2 = r * r;
            if !r2.is_finite() {
                continue;
            }
            if best.is_none_or(|(b, _, _)| r2 < b) {
                best = Some((r2, hi, kj));
            }
        }
    }
    let (grid_r2, hi, kj) =
        best.ok_or_else(|| Error::Estimation("tfbm: no grid point with a finite residual".into()))?;
    let grid_h = hi as f64 * step;
    let k_hat = kj as f64 * step;

    let bracket = (config.root_eps, 1.0 - config.root_eps);
    let solve_h = |k: f64| {
        let target = sigma2 * (2.0 - 2f64.powf(k));
        halley_solve(
            |h| {
                let (s, d1, d2) = mean_square_moment(&sub, h * k);
                (s - target, d1 * k, d2 * k * k)
            },
            bracket,
            config.root_tol,
        )
    };

    let mut warnings = vec![
        "non-identifiable: (H, K) lie on a curve of zero residual; K picked by grid minimum"
            .to_string(),
    ];
    let (h_hat, report) = match solve_h(k_hat) {
        Ok(mut rep) => {
            rep.method = Method::GridRefine;
            (rep.root_or_argmin, rep)
        }
        Err(Error::NoSignChange { .. }) => {
            warnings.push(format!(
                "refinement at K = {k_hat} has no root in H; keeping the grid point"
            ));
            let r = grid_r2.sqrt();
            (
                grid_h,
                SolveReport {
                    root_or_argmin: grid_h,
                    iterations: 0,
                    residual: Some(r),
                    value: r,
                    method: Method::GridRefine,
                    bracket,
                },
            )
        }
        Err(e) => return Err(e),
    };

    let solution_curve = (1..=g)
        .filter_map(|kj| {
            let k = kj as f64 * step;
            solve_h(k).ok().map(|rep| (rep.root_or_argmin, k))
        })
        .collect();

    Ok(EstimateResult {
        index_estimate: quantize(h_hat * k_hat),
        h_component: Some(h_hat),
        k_component: Some(k_hat),
        algorithm: Algorithm::TfbmKnown,
        report: SolveReport {
            iterations: report.iterations + g * g,
            ..report
        },
        warnings,
        solution_curve,
    })
}

/// Quadratic-variations estimator `½ log₂(V⁽²⁾ / V⁽¹⁾)` from the mean squared
/// increments at lags 2/n and 1/n.
pub fn estimate_qv(path: &SamplePath) -> Result<EstimateResult> {
    check_len(path)?;
    let v = &path.values;
    let n = path.n;
    let lag1 = (0..n).map(|i| (v[i + 1] - v[i]).powi(2)).sum::<f64>() / n as f64;
    let lag2 = (0..n - 1).map(|i| (v[i + 2] - v[i]).powi(2)).sum::<f64>() / (n - 1) as f64;
    if lag1 == 0.0 {
        return Err(Error::DegenerateInput(
            "zero quadratic variation: the path is constant".into(),
        ));
    }
    let raw = 0.5 * (lag2 / lag1).log2();
    let eps = EstimatorConfig::default().root_eps;
    let mut warnings = Vec::new();
    let h = if raw.is_nan() {
        return Err(Error::Estimation(
            "quadratic-variations ratio is NaN".into(),
        ));
    } else if raw < eps || raw > 1.0 - eps {
        let clamped = raw.clamp(eps, 1.0 - eps);
        warnings.push(format!(
            "boundary: raw QV estimate {raw} clamped to {clamped}"
        ));
        clamped
    } else {
        raw
    };
    Ok(EstimateResult {
        index_estimate: quantize(h),
        h_component: None,
        k_component: None,
        algorithm: Algorithm::Qv,
        report: SolveReport {
            root_or_argmin: raw,
            iterations: 0,
            residual: None,
            value: raw,
            method: Method::GridRefine,
            bracket: (eps, 1.0 - eps),
        },
        warnings,
        solution_curve: Vec::new(),
    })
}

/// An estimator bound to the scale information it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    KnownSigma { sigma2: f64 },
    Kurtosis,
    Sfbm { sigma2: f64 },
    Tfbm { sigma2: f64 },
    Qv,
}

impl Estimator {
    /// The estimator for `algorithm` when data come from `spec`. Known-sigma
    /// uses `Var(V(1))` of the model; sfBm/tfBm use its kernel scale.
    pub fn for_model(algorithm: Algorithm, spec: &KernelSpec) -> Self {
        match algorithm {
            Algorithm::KnownSigma => Estimator::KnownSigma {
                sigma2: spec.variance_at_one(),
            },
            Algorithm::Kurtosis => Estimator::Kurtosis,
            Algorithm::SfbmKnown => Estimator::Sfbm {
                sigma2: spec.sigma2(),
            },
            Algorithm::TfbmKnown => Estimator::Tfbm {
                sigma2: spec.sigma2(),
            },
            Algorithm::Qv => Estimator::Qv,
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Estimator::KnownSigma { .. } => Algorithm::KnownSigma,
            Estimator::Kurtosis => Algorithm::Kurtosis,
            Estimator::Sfbm { .. } => Algorithm::SfbmKnown,
            Estimator::Tfbm { .. } => Algorithm::TfbmKnown,
            Estimator::Qv => Algorithm::Qv,
        }
    }

    pub fn estimate(&self, path: &SamplePath) -> Result<EstimateResult> {
        self.estimate_with(path, &EstimatorConfig::default())
    }

    pub fn estimate_with(
        &self,
        path: &SamplePath,
        config: &EstimatorConfig,
    ) -> Result<EstimateResult> {
        match *self {
            Estimator::KnownSigma { sigma2 } => estimate_known_sigma_with(path, sigma2, config),
            Estimator::Kurtosis => estimate_kurtosis_with(path, config),
            Estimator::Sfbm { sigma2 } => estimate_sfbm_scaled(path, sigma2, config),
            Estimator::Tfbm { sigma2 } => estimate_tfbm_scaled(path, sigma2, config),
            Estimator::Qv => estimate_qv(path),
        }
    }
}

/// Whether an algorithm makes sense for data from `family`.
pub fn applicable(algorithm: Algorithm, family: Family) -> bool {
    match algorithm {
        Algorithm::KnownSigma | Algorithm::Kurtosis => true,
        Algorithm::SfbmKnown => family == Family::Sfbm,
        Algorithm::TfbmKnown => family == Family::Tfbm,
        Algorithm::Qv => family == Family::Fbm,
    }
}
