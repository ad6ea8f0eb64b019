//! Lamperti transforms and the exponential subsampling of a grid path.
//!
//! The Lamperti transform `L_V(t) = e^{-tH} V(e^t)` maps an H-self-similar
//! process to a stationary one. On a grid path over `[0, 1]` the stationary
//! series is realised by sampling `V` at the exponentially spaced indices
//! `⌊n^{j/n}⌋` and rescaling by `b_j^H = n^{H(1 - j/n)}`.

use crate::error::{Error, Result};
use crate::simulate::SamplePath;

/// Paired sequences `a_j = V(⌊n^{j/n}⌋ / n)` and `b_j = n^{1 - j/n}`,
/// `j = 0..=n`, plus the distinctness threshold `J_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampledSeries {
    pub n: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Grid indices `⌊n^{j/n}⌋` that produced `a`.
    pub indices: Vec<usize>,
    pub j_threshold: usize,
    /// `1 - j/n`, so that `b_j^p = n^{p (1 - j/n)}` is a single `powf`.
    exponents: Vec<f64>,
}

impl SubsampledSeries {
    /// Builds the series directly from `a`; `b` follows from `n = a.len() - 1`.
    pub fn from_a(a: Vec<f64>) -> Result<Self> {
        if a.len() < 3 {
            return Err(Error::Argument(format!(
                "subsampled series needs n >= 2, got {} values",
                a.len()
            )));
        }
        let n = a.len() - 1;
        let exponents = exponents(n);
        let nf = n as f64;
        Ok(SubsampledSeries {
            n,
            b: exponents.iter().map(|&e| nf.powf(e)).collect(),
            indices: (0..=n).map(|j| floor_index(n, j)).collect(),
            j_threshold: j_threshold(n),
            exponents,
            a,
        })
    }

    /// `b_j^p`, evaluated as `n^{p (1 - j/n)}`.
    #[inline]
    pub fn b_pow(&self, j: usize, p: f64) -> f64 {
        (self.n as f64).powf(p * self.exponents[j])
    }

    /// `ln b_j`.
    #[inline]
    pub fn ln_b(&self, j: usize) -> f64 {
        self.exponents[j] * (self.n as f64).ln()
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

fn exponents(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..=n).map(|j| 1.0 - j as f64 / nf).collect()
}

/// `⌊n^{j/n}⌋`, snapping values within 1e-9 of an integer first so that
/// e.g. `4^{2/4}` evaluating to 1.9999999999999998 floors to 2.
pub fn floor_index(n: usize, j: usize) -> usize {
    let x = (n as f64).powf(j as f64 / n as f64);
    let nearest = x.round();
    let snapped = if (x - nearest).abs() <= 1e-9 {
        nearest
    } else {
        x.floor()
    };
    (snapped as usize).clamp(1, n)
}

/// `J_n = ⌈-n log_n(n^{1/n} - 1)⌉` clamped to `[0, n]`: the first `j` from
/// which consecutive exponential grid points are at least one step apart.
pub fn j_threshold(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    let nf = n as f64;
    let root_gap = nf.powf(1.0 / nf) - 1.0;
    let raw = (-nf * root_gap.ln() / nf.ln()).ceil();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(n)
    }
}

pub fn build_subsample(path: &SamplePath) -> Result<SubsampledSeries> {
    let n = path.n;
    if n < 2 || path.values.len() != n + 1 {
        return Err(Error::Argument(format!(
            "path must hold n + 1 >= 3 values, got n = {n} with {} values",
            path.values.len()
        )));
    }
    let indices: Vec<usize> = (0..=n).map(|j| floor_index(n, j)).collect();
    let a = indices.iter().map(|&i| path.values[i]).collect();
    let exponents = exponents(n);
    let nf = n as f64;
    Ok(SubsampledSeries {
        n,
        a,
        b: exponents.iter().map(|&e| nf.powf(e)).collect(),
        indices,
        j_threshold: j_threshold(n),
        exponents,
    })
}

/// A series indexed by strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimedSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Argument(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("times must be strictly increasing".into()));
        }
        Ok(TimedSeries { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Lamperti transform on the log-time axis: an input value `V(e^t)` at time
/// `t` becomes `e^{-tH} V(e^t)`; times are unchanged.
pub fn lamperti_forward(series: &TimedSeries, h: f64) -> TimedSeries {
    let values = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &v)| (-t * h).exp() * v)
        .collect();
    TimedSeries {
        times: series.times.clone(),
        values,
    }
}

/// Inverse Lamperti transform on the log-time axis: a stationary value
/// `U(t)` becomes `V(e^t) = e^{tH} U(t)`; times are unchanged.
pub fn lamperti_inverse(series: &TimedSeries, h: f64) -> TimedSeries {
    let values = series
        .times
        .iter()
        .zip(&series.values)
        .map(|(&t, &u)| (t * h).exp() * u)
        .collect();
    TimedSeries {
        times: series.times.clone(),
        values,
    }
}

/// Pointwise inverse in natural time: `V(t) = t^H U(log t)` for `t > 0`,
/// `V(0) = 0`. `u_at_log_t` is the stationary value at `log t`.
pub fn lamperti_inverse_at(t: f64, u_at_log_t: f64, h: f64) -> Result<f64> {
    if t == 0.0 {
        Ok(0.0)
    } else if t > 0.0 && t.is_finite() {
        Ok(t.powf(h) * u_at_log_t)
    } else {
        Err(Error::Argument(format!(
            "inverse Lamperti transform is defined for t >= 0, got {t}"
        )))
    }
}

/// Stationary series `U_n(j/n) = a_j b_j^H`, `j = 0..=n`.
pub fn stationary_series(path: &SamplePath, h: f64) -> Result<TimedSeries> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::ParameterDomain(format!(
            "H = {h} must lie in (0, 1)"
        )));
    }
    let sub = build_subsample(path)?;
    let nf = sub.n as f64;
    let times = (0..=sub.n).map(|j| j as f64 / nf).collect();
    let values = sub
        .a
        .iter()
        .enumerate()
        .map(|(j, &a)| a * sub.b_pow(j, h))
        .collect();
    TimedSeries::new(times, values)
}
