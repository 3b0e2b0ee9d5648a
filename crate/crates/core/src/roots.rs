//! Scalar root finding for monotone functions.

use alloc::format;

use crate::{Error, Result};

/// Grows `[lo, hi]` until `f(lo)` and `f(hi)` have opposite signs.
///
/// The interval is widened on the side whose sign matches the other end:
/// `hi` moves up by doubling its distance from `lo`, and vice versa.
/// `positive_lower` keeps the lower end strictly positive by halving it
/// instead (used for scale parameters).
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    f: &mut F,
    mut lo: f64,
    mut hi: f64,
    positive_lower: bool,
    max_steps: usize,
) -> Result<(f64, f64, f64, f64)> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    for _ in 0..max_steps {
        if flo.is_nan() || fhi.is_nan() {
            return Err(Error::Numeric(format!("NaN while bracketing on [{lo}, {hi}]")));
        }
        if flo * fhi <= 0.0 {
            return Ok((lo, hi, flo, fhi));
        }
        let width = hi - lo;
        // Both ends share a sign; for an increasing f, negative means move up.
        let increasing = fhi > flo;
        if (flo < 0.0) == increasing {
            lo = hi;
            flo = fhi;
            hi += 2.0 * width;
            fhi = f(hi);
        } else if positive_lower {
            hi = lo;
            fhi = flo;
            lo *= 0.5;
            flo = f(lo);
        } else {
            hi = lo;
            fhi = flo;
            lo -= 2.0 * width;
            flo = f(lo);
        }
    }
    Err(Error::Numeric(format!(
        "could not bracket a root after {max_steps} expansions (last interval [{lo}, {hi}])"
    )))
}

/// Brent's method on a sign-changing bracket.
pub fn brent<F: FnMut(f64) -> f64>(
    f: &mut F,
    lo: f64,
    hi: f64,
    flo: f64,
    fhi: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, flo, fhi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::Numeric(format!("[{lo}, {hi}] does not bracket a root")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
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
        if fb.is_nan() {
            return Err(Error::Numeric(format!("NaN during root search at {b}")));
        }
    }
    Err(Error::Numeric(format!("Brent did not converge in {max_iter} iterations")))
}
