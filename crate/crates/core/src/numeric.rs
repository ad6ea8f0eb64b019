//! Scalar solvers: safeguarded Halley root finding and Brent minimization.

use crate::error::{Error, Result};

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
pub const DEFAULT_MIN_TOL: f64 = 1e-8;
pub const MAX_HALLEY_ITERATIONS: usize = 100;

const MAX_BRENT_ITERATIONS: usize = 500;
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Halley,
    BisectionFallback,
    Brent,
    GridRefine,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Halley => "halley",
            Method::BisectionFallback => "bisection-fallback",
            Method::Brent => "brent",
            Method::GridRefine => "grid-refine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub root_or_argmin: f64,
    pub iterations: usize,
    /// `|f(root)|` for root finding; `None` for minimization.
    pub residual: Option<f64>,
    /// Objective value at the returned point.
    pub value: f64,
    pub method: Method,
    pub bracket: (f64, f64),
}

/// Root of `f` on a sign-change bracket. `f` returns `(f, f', f'')`.
///
/// Halley steps `x ← x − 2ff′/(2f′² − ff″)` are taken while they stay inside
/// the maintained bracket; otherwise a bisection step is substituted. After
/// `MAX_HALLEY_ITERATIONS` the solver finishes with plain bisection.
pub fn halley_solve<F>(f: F, bracket: (f64, f64), tol: f64) -> Result<SolveReport>
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let (lo0, hi0) = bracket;
    if !(lo0 < hi0) || !(tol > 0.0) {
        return Err(Error::Argument(format!(
            "halley_solve needs lo < hi and tol > 0, got [{lo0}, {hi0}], tol = {tol}"
        )));
    }
    let mut lo = lo0;
    let mut hi = hi0;
    let mut f_lo = f(lo).0;
    let f_hi = f(hi).0;
    let report = |x: f64, fx: f64, iterations: usize, method: Method| SolveReport {
        root_or_argmin: x,
        iterations,
        residual: Some(fx.abs()),
        value: fx,
        method,
        bracket,
    };
    if f_lo == 0.0 {
        return Ok(report(lo, f_lo, 0, Method::Halley));
    }
    if f_hi == 0.0 {
        return Ok(report(hi, f_hi, 0, Method::Halley));
    }
    if !(f_lo * f_hi < 0.0) {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }

    let mut x = 0.5 * (lo + hi);
    for iteration in 1..=MAX_HALLEY_ITERATIONS {
        let (fx, d1, d2) = f(x);
        if fx == 0.0 || fx.abs() <= tol {
            return Ok(report(x, fx, iteration, Method::Halley));
        }
        if (fx < 0.0) == (f_lo < 0.0) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let denom = 2.0 * d1 * d1 - fx * d2;
        let mut next = if denom.abs() <= 1e-300 || !denom.is_finite() {
            f64::NAN
        } else {
            x - 2.0 * fx * d1 / denom
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= tol * x.abs().max(1.0) || hi - lo <= tol * x.abs().max(1.0) {
            let fx = f(x).0;
            return Ok(report(x, fx, iteration + 1, Method::Halley));
        }
    }

    let mut iterations = MAX_HALLEY_ITERATIONS;
    loop {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid).0;
        iterations += 1;
        if fm == 0.0 || fm.abs() <= tol || hi - lo <= 2.0 * tol * mid.abs().max(1.0) {
            return Ok(report(mid, fm, iterations, Method::BisectionFallback));
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
}

/// Local minimizer of `g` on `[lo, hi]` by Brent's golden-section / parabolic
/// interpolation hybrid. `g` is never evaluated outside the interval.
pub fn brent_minimize<G>(g: G, interval: (f64, f64), tol: f64) -> SolveReport
where
    G: Fn(f64) -> f64,
{
    let (lo, hi) = interval;
    let eval = |x: f64| {
        let v = g(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut a = lo;
    let mut b = hi;
    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = eval(x);
    let mut fw = fx;
    let mut fv = fx;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut iterations = 1;

    for _ in 0..MAX_BRENT_ITERATIONS {
        let m = 0.5 * (a + b);
        let tol1 = tol + f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let step = if d.abs() >= tol1 {
            d
        } else if d > 0.0 {
            tol1
        } else {
            -tol1
        };
        let u = (x + step).clamp(lo, hi);
        let fu = eval(u);
        iterations += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    SolveReport {
        root_or_argmin: x,
        iterations,
        residual: None,
        value: fx,
        method: Method::Brent,
        bracket: interval,
    }
}

/// Coarse scan of `points` equally spaced abscissae on `[lo, hi]`, then Brent
/// on the two cells around the best scan point. Returns whichever of the scan
/// minimum and the Brent result is lower (`GridRefine` if the scan wins).
pub fn scan_then_brent<G>(g: G, interval: (f64, f64), points: usize, tol: f64) -> SolveReport
where
    G: Fn(f64) -> f64,
{
    let (lo, hi) = interval;
    let points = points.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points)
        .map(|i| {
            if i + 1 == points {
                hi
            } else {
                lo + i as f64 * step
            }
        })
        .collect();
    let mut best = 0;
    let mut best_value = f64::INFINITY;
    for (i, &x) in grid.iter().enumerate() {
        let v = g(x);
        if v < best_value {
            best_value = v;
            best = i;
        }
    }
    let sub = (
        grid[best.saturating_sub(1)],
        grid[(best + 1).min(points - 1)],
    );
    let refined = brent_minimize(&g, sub, tol);
    if refined.value <= best_value {
        SolveReport {
            iterations: refined.iterations + points,
            bracket: interval,
            ..refined
        }
    } else {
        SolveReport {
            root_or_argmin: grid[best],
            iterations: refined.iterations + points,
            residual: None,
            value: best_value,
            method: Method::GridRefine,
            bracket: interval,
        }
    }
}
