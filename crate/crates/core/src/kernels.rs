//! Closed-form covariance kernels of the four self-similar Gaussian families.
//!
//! | family | Cov(V(s), V(t)) | index |
//! |--------|-----------------|-------|
//! | fBm    | σ²/2 (t^{2H} + s^{2H} − \|t−s\|^{2H}) | H |
//! | sfBm   | σ² (t^{2H} + s^{2H} − ½[(t+s)^{2H} + \|t−s\|^{2H}]) | H |
//! | bfBm   | σ²/2^K ((t^{2H} + s^{2H})^K − \|t−s\|^{2HK}) | HK |
//! | tfBm   | σ² (t^{2HK} + s^{2HK} − (t^{2H} + s^{2H})^K) | HK |
//!
//! All four vanish at the origin and are evaluated on canonically ordered
//! arguments, so `cov(s, t)` and `cov(t, s)` are bit-identical.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Fbm,
    Sfbm,
    Bfbm,
    Tfbm,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Fbm, Family::Sfbm, Family::Bfbm, Family::Tfbm];

    /// Whether the family carries the second parameter `K`.
    pub fn uses_k(self) -> bool {
        matches!(self, Family::Bfbm | Family::Tfbm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Fbm => "fbm",
            Family::Sfbm => "sfbm",
            Family::Bfbm => "bfbm",
            Family::Tfbm => "tfbm",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fbm" => Ok(Family::Fbm),
            "sfbm" => Ok(Family::Sfbm),
            "bfbm" => Ok(Family::Bfbm),
            "tfbm" => Ok(Family::Tfbm),
            other => Err(Error::Argument(format!(
                "unknown process family `{other}` (expected fbm, sfbm, bfbm or tfbm)"
            ))),
        }
    }
}

/// Process family together with its parameters. Construction validates the
/// parameter domain, so every `KernelSpec` in circulation is admissible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: Family,
    h: f64,
    k: f64,
    sigma2: f64,
}

impl KernelSpec {
    /// `k` is ignored (stored as 1) for fBm and sfBm.
    pub fn new(family: Family, h: f64, k: f64, sigma2: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "H = {h} must lie in (0, 1)"
            )));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "sigma2 = {sigma2} must be positive and finite"
            )));
        }
        let k = match family {
            Family::Fbm | Family::Sfbm => 1.0,
            Family::Bfbm => {
                if !(k > 0.0 && k <= 1.0) {
                    return Err(Error::ParameterDomain(format!(
                        "K = {k} must lie in (0, 1] for bfbm"
                    )));
                }
                k
            }
            Family::Tfbm => {
                if !(k > 0.0 && k < 1.0) {
                    return Err(Error::ParameterDomain(format!(
                        "K = {k} must lie in (0, 1) for tfbm"
                    )));
                }
                k
            }
        };
        Ok(KernelSpec {
            family,
            h,
            k,
            sigma2,
        })
    }

    pub fn fbm(h: f64, sigma2: f64) -> Result<Self> {
        Self::new(Family::Fbm, h, 1.0, sigma2)
    }

    pub fn sfbm(h: f64, sigma2: f64) -> Result<Self> {
        Self::new(Family::Sfbm, h, 1.0, sigma2)
    }

    pub fn bfbm(h: f64, k: f64, sigma2: f64) -> Result<Self> {
        Self::new(Family::Bfbm, h, k, sigma2)
    }

    pub fn tfbm(h: f64, k: f64, sigma2: f64) -> Result<Self> {
        Self::new(Family::Tfbm, h, k, sigma2)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Same family and shape parameters with a different variance scale.
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.family, self.h, self.k, sigma2)
    }

    /// H for fBm/sfBm, H·K for bfBm/tfBm.
    pub fn self_similarity_index(&self) -> f64 {
        match self.family {
            Family::Fbm | Family::Sfbm => self.h,
            Family::Bfbm | Family::Tfbm => self.h * self.k,
        }
    }

    /// Var(V(1)).
    pub fn variance_at_one(&self) -> f64 {
        self.kernel(1.0, 1.0)
    }

    /// Cov(V(s), V(t)) for s, t ≥ 0.
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        if !(s >= 0.0 && t >= 0.0 && s.is_finite() && t.is_finite()) {
            return Err(Error::Argument(format!(
                "covariance needs finite nonnegative times, got s = {s}, t = {t}"
            )));
        }
        Ok(self.kernel(s, t))
    }

    /// Kernel evaluation without argument checks; callers guarantee s, t ≥ 0.
    pub(crate) fn kernel(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        if s == 0.0 {
            return 0.0;
        }
        self.sigma2 * self.unit_kernel(s, t)
    }

    // σ² = 1 kernel on ordered arguments 0 < s ≤ t.
    fn unit_kernel(&self, s: f64, t: f64) -> f64 {
        let h2 = 2.0 * self.h;
        let gap = t - s;
        match self.family {
            Family::Fbm => 0.5 * (t.powf(h2) + s.powf(h2) - pow0(gap, h2)),
            Family::Sfbm => t.powf(h2) + s.powf(h2) - 0.5 * ((t + s).powf(h2) + pow0(gap, h2)),
            Family::Bfbm => {
                let k = self.k;
                ((t.powf(h2) + s.powf(h2)).powf(k) - pow0(gap, h2 * k)) / 2f64.powf(k)
            }
            Family::Tfbm => {
                let k = self.k;
                let hk2 = h2 * k;
                t.powf(hk2) + s.powf(hk2) - (t.powf(h2) + s.powf(h2)).powf(k)
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.family.uses_k() {
            write!(
                f,
                "{}(H={}, K={}, sigma2={})",
                self.family, self.h, self.k, self.sigma2
            )
        } else {
            write!(f, "{}(H={}, sigma2={})", self.family, self.h, self.sigma2)
        }
    }
}

// 0^x is taken as 0 for the positive exponents used here.
#[inline]
fn pow0(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(e)
    }
}

/// Autocovariance at lag `k` of fractional Gaussian noise sampled with step
/// `1/n`, i.e. of the increments of fBm on the grid `j/n`.
pub fn fgn_autocov(h: f64, sigma2: f64, k: u64, n: usize) -> f64 {
    let h2 = 2.0 * h;
    let k = k as f64;
    let second_diff = pow0(k + 1.0, h2) - 2.0 * pow0(k, h2) + pow0((k - 1.0).abs(), h2);
    sigma2 / (2.0 * (n as f64).powf(h2)) * second_diff
}

/// Covariance of `(V(1/n), ..., V(n/n))`. The origin is excluded because
/// `V(0) = 0` almost surely.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    n: usize,
    entries: DMatrix<f64>,
}

impl CovMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry for grid points `i/n` and `j/n`, 1-based.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[(i - 1, j - 1)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

pub fn cov_matrix(spec: &KernelSpec, n: usize) -> Result<CovMatrix> {
    if n < 2 {
        return Err(Error::Argument(format!(
            "grid size n = {n} must be at least 2"
        )));
    }
    let step = 1.0 / n as f64;
    let mut entries = DMatrix::zeros(n, n);
    for j in 0..n {
        let t = (j + 1) as f64 * step;
        for i in 0..=j {
            let s = (i + 1) as f64 * step;
            let c = spec.kernel(s, t);
            entries[(i, j)] = c;
            entries[(j, i)] = c;
        }
    }
    Ok(CovMatrix { n, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_specs() -> Vec<KernelSpec> {
        let mut out = Vec::new();
        for &h in &[0.2, 0.5, 0.7, 0.8] {
            out.push(KernelSpec::fbm(h, 1.0).unwrap());
            out.push(KernelSpec::sfbm(h, 1.0).unwrap());
            for &k in &[0.5, 0.8] {
                out.push(KernelSpec::bfbm(h, k, 1.0).unwrap());
                out.push(KernelSpec::tfbm(h, k, 1.0).unwrap());
            }
        }
        out
    }

    #[test]
    fn domain_checks() {
        assert!(KernelSpec::fbm(0.0, 1.0).is_err());
        assert!(KernelSpec::fbm(1.0, 1.0).is_err());
        assert!(KernelSpec::fbm(0.5, 0.0).is_err());
        assert!(KernelSpec::bfbm(0.5, 1.0, 1.0).is_ok());
        assert!(KernelSpec::bfbm(0.5, 1.1, 1.0).is_err());
        assert!(KernelSpec::tfbm(0.5, 1.0, 1.0).is_err());
        assert!(KernelSpec::tfbm(0.5, 0.0, 1.0).is_err());
        assert!(matches!(
            KernelSpec::fbm(0.5, 1.0).unwrap().cov(-1.0, 1.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn index_of_each_family() {
        assert_eq!(
            KernelSpec::fbm(0.3, 1.0).unwrap().self_similarity_index(),
            0.3
        );
        assert_eq!(
            KernelSpec::sfbm(0.3, 1.0).unwrap().self_similarity_index(),
            0.3
        );
        let b = KernelSpec::bfbm(0.8, 0.5, 1.0).unwrap();
        assert!((b.self_similarity_index() - 0.4).abs() < 1e-15);
        let t = KernelSpec::tfbm(0.2, 0.5, 1.0).unwrap();
        assert!((t.self_similarity_index() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn unit_variances() {
        for &h in &[0.1, 0.5, 0.9] {
            let f = KernelSpec::fbm(h, 1.0).unwrap();
            assert_eq!(f.cov(1.0, 1.0).unwrap(), 1.0);
            let s = KernelSpec::sfbm(h, 1.0).unwrap();
            let expected = 2.0 - 2f64.powf(2.0 * h - 1.0);
            assert!((s.cov(1.0, 1.0).unwrap() - expected).abs() < 1e-15);
        }
        for &k in &[0.3, 0.5, 0.8] {
            let t = KernelSpec::tfbm(0.6, k, 1.0).unwrap();
            assert!((t.cov(1.0, 1.0).unwrap() - (2.0 - 2f64.powf(k))).abs() < 1e-15);
        }
    }

    #[test]
    fn sfbm_half_is_brownian() {
        let s = KernelSpec::sfbm(0.5, 1.0).unwrap();
        for &(a, b) in &[(0.1, 0.7), (0.5, 0.5), (2.0, 0.3), (1.0, 3.0)] {
            let c = s.cov(a, b).unwrap();
            let m: f64 = f64::min(a, b);
            assert!((c - m).abs() < 1e-14, "{a} {b}: {c}");
        }
    }

    #[test]
    fn bfbm_with_unit_k_is_fbm() {
        for &h in &[0.2, 0.5, 0.7, 0.8] {
            let b = KernelSpec::bfbm(h, 1.0, 1.0).unwrap();
            let f = KernelSpec::fbm(h, 1.0).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    let (s, t) = (i as f64 * 0.15, j as f64 * 0.15);
                    let d = (b.cov(s, t).unwrap() - f.cov(s, t).unwrap()).abs();
                    assert!(d <= 1e-14, "H={h} s={s} t={t} diff={d}");
                }
            }
        }
    }

    #[test]
    fn vanishes_at_origin_and_is_symmetric() {
        for spec in all_specs() {
            for &t in &[0.0, 0.01, 0.5, 1.0, 7.0] {
                assert_eq!(spec.cov(0.0, t).unwrap(), 0.0, "{spec}");
                assert_eq!(spec.cov(t, 0.0).unwrap(), 0.0, "{spec}");
                for &s in &[0.03, 0.4, 1.0, 2.5] {
                    assert_eq!(
                        spec.cov(s, t).unwrap().to_bits(),
                        spec.cov(t, s).unwrap().to_bits()
                    );
                }
            }
        }
    }

    #[test]
    fn scale_is_exact() {
        for spec in all_specs() {
            let scaled = spec.with_sigma2(3.7).unwrap();
            for &(s, t) in &[(0.2, 0.9), (1.0, 1.0), (0.33, 0.34)] {
                assert_eq!(scaled.cov(s, t).unwrap(), 3.7 * spec.cov(s, t).unwrap());
            }
        }
    }

    #[test]
    fn kernel_self_similarity() {
        for spec in all_specs() {
            let two_h = 2.0 * spec.self_similarity_index();
            for &lambda in &[0.5, 2.0, 10.0] {
                for &(s, t) in &[(0.2, 0.9), (1.0, 1.0), (0.33, 0.34), (0.05, 0.6)] {
                    let lhs = spec.cov(lambda * s, lambda * t).unwrap();
                    let rhs = lambda.powf(two_h) * spec.cov(s, t).unwrap();
                    assert!(
                        (lhs - rhs).abs() <= 1e-12 * rhs.abs(),
                        "{spec} lambda={lambda}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn fgn_autocov_values() {
        assert_eq!(fgn_autocov(0.5, 1.0, 1, 1), 0.0);
        assert_eq!(fgn_autocov(0.5, 1.0, 5, 64), 0.0);
        for &h in &[0.1, 0.5, 0.9] {
            assert!((fgn_autocov(h, 1.0, 0, 1) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn fgn_autocov_matches_second_difference_of_kernel() {
        // Cov(V(k+1) - V(k), V(1) - V(0)) from the fBm kernel directly.
        let f = KernelSpec::fbm(0.7, 1.0).unwrap();
        for k in 0..6u64 {
            let kf = k as f64;
            let brute = f.cov(kf + 1.0, 1.0).unwrap()
                - f.cov(kf, 1.0).unwrap()
                - f.cov(kf + 1.0, 0.0).unwrap()
                + f.cov(kf, 0.0).unwrap();
            let got = fgn_autocov(0.7, 1.0, k, 1);
            assert!((got - brute).abs() < 1e-13, "k={k}: {got} vs {brute}");
        }
        // k = 2 frozen: (3^1.4 - 2*2^1.4 + 1)/2
        let k2 = fgn_autocov(0.7, 1.0, 2, 1);
        assert!((k2 - 0.5 * (3f64.powf(1.4) - 2.0 * 2f64.powf(1.4) + 1.0)).abs() < 1e-15);
        // step 1/n rescales by n^{-2H}
        let scaled = fgn_autocov(0.7, 1.0, 2, 8);
        assert!((scaled - k2 / 8f64.powf(1.4)).abs() < 1e-15);
    }

    #[test]
    fn cov_matrix_small_cases() {
        let h = 0.3;
        let m = cov_matrix(&KernelSpec::fbm(h, 1.0).unwrap(), 2).unwrap();
        assert!((m.at(1, 1) - 0.5f64.powf(2.0 * h)).abs() < 1e-15);
        assert_eq!(m.at(2, 2), 1.0);
        assert!((m.at(1, 2) - 0.5).abs() < 1e-15);

        let b = cov_matrix(&KernelSpec::sfbm(0.5, 1.0).unwrap(), 4).unwrap();
        for i in 1..=4 {
            for j in 1..=4 {
                assert!((b.at(i, j) - i.min(j) as f64 / 4.0).abs() < 1e-15);
            }
        }
        assert!(cov_matrix(&KernelSpec::fbm(0.5, 1.0).unwrap(), 1).is_err());
    }

    #[test]
    fn cov_matrix_is_symmetric_and_psd() {
        for spec in all_specs() {
            for &n in &[8usize, 64] {
                let m = cov_matrix(&spec, n).unwrap().into_matrix();
                assert_eq!(m, m.transpose());
                for i in 0..n {
                    assert!(m[(i, i)] > 0.0);
                }
                let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
                let max = eig.max();
                let min = eig.min();
                assert!(min >= -1e-8 * max, "{spec} n={n}: min eig {min}, max {max}");
            }
        }
    }
}
