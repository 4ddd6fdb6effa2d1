//! Scalar root finding: sign scans, bisection and Brent's method.

use crate::error::{Error, Result};

/// Points at which brackets are scanned by default.
pub const SCAN_POINTS: usize = 512;

/// Sign-change brackets of `f` on `n` points between `lo` and `hi`.
///
/// With `log = true` the points are geometrically spaced (`lo > 0`).
pub fn scan_brackets<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    n: usize,
    log: bool,
) -> Vec<(f64, f64)> {
    let n = n.max(2);
    let point = |k: usize| {
        let t = k as f64 / (n - 1) as f64;
        if log {
            (lo.ln() + t * (hi.ln() - lo.ln())).exp()
        } else {
            lo + t * (hi - lo)
        }
    };
    let mut out = Vec::new();
    let mut x0 = point(0);
    let mut f0 = f(x0);
    for k in 1..n {
        let x1 = if k == n - 1 { hi } else { point(k) };
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push((x0, x0));
        } else if f0.is_finite() && f1.is_finite() && f0.signum() != f1.signum() && f1 != 0.0 {
            out.push((x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        out.push((x0, x0));
    }
    out
}

/// Brent's method on a sign-changing bracket `[a, b]`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::NoRootInBracket {
            lo: a.min(b),
            hi: a.max(b),
            points: 2,
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::SolverDidNotConverge {
        iterations: 200,
        residual: fb.abs(),
    })
}

/// Last point of `[lo, hi]` where the non-increasing predicate-like function
/// `f` is non-negative, by bisection. Assumes `f(lo) >= 0`.
pub fn bisect_last_nonneg<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> f64 {
    if f(hi) >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Root of a decreasing function on `[lo, hi]`; endpoints when the sign does
/// not change.
pub fn decreasing_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64) -> f64 {
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Maximizer of a concave function on `[lo, hi]` given its derivative.
pub fn concave_argmax<D: FnMut(f64) -> f64>(derivative: D, lo: f64, hi: f64) -> f64 {
    decreasing_root(derivative, lo, hi)
}

/// Root of `a x^2 + b x + c` in `[lo, hi]` when exactly one exists; the
/// caller guarantees the polynomial changes sign on the interval.
pub fn quadratic_root_in(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Option<f64> {
    let pick = |x: f64| {
        let span = (hi - lo).abs().max(1.0);
        (x >= lo - 1e-12 * span && x <= hi + 1e-12 * span).then(|| x.clamp(lo, hi))
    };
    if a.abs() <= 1e-300 || (a * c).abs() < 1e-14 * b * b {
        if b == 0.0 {
            return None;
        }
        if a == 0.0 {
            return pick(-c / b);
        }
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let qq = -0.5 * (b + sq.copysign(b));
    let r1 = if a != 0.0 { qq / a } else { f64::NAN };
    let r2 = if qq != 0.0 { c / qq } else { f64::NAN };
    match (pick(r1), pick(r2)) {
        (Some(x), None) | (None, Some(x)) => Some(x),
        (Some(x), Some(y)) => {
            let ev = |t: f64| (a * t * t + b * t + c).abs();
            Some(if ev(x) <= ev(y) { x } else { y })
        }
        (None, None) => None,
    }
}
