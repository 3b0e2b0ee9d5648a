//! Integrals against the exponential mixing density.
//!
//! Every integral here has the form `∫₀^∞ g(w) e^{-w} dw`. After the
//! substitution `w = e^t` the integrand `g(e^t) exp(t - e^t)` is smooth and
//! decays double-exponentially on the right and exponentially on the left,
//! so the trapezoidal rule converges geometrically in the step size.
//! Gauss-Laguerre rules look natural here but converge slowly when `g`
//! has a `w^{-1/2}` singularity or a steep transition near `w = 0`.

use alloc::format;

use crate::{Error, Result};

/// Lower end of the `t = ln w` range; `e^{-42}` is far below `f64` noise
/// relative to the O(1) bulk of the mixing density.
const T_LO: f64 = -42.0;
/// Upper end: `exp(-e^{3.9}) < 1e-21`.
const T_HI: f64 = 3.9;

/// `∫₀^∞ g(w) e^{-w} dw` for bounded `g`, refined by step halving until two
/// successive trapezoid sums agree to `rel_tol` (relative, with a tiny
/// absolute floor).
pub fn exp_weighted<G: FnMut(f64) -> f64>(mut g: G, rel_tol: f64) -> Result<f64> {
    let mut integrand = |t: f64| {
        let w = libm::exp(t);
        let v = g(w);
        if v == 0.0 {
            0.0
        } else {
            v * libm::exp(t - w)
        }
    };
    let mut h = 0.2;
    let mut n = libm::ceil((T_HI - T_LO) / h) as usize;
    h = (T_HI - T_LO) / n as f64;
    let mut sum = 0.5 * (integrand(T_LO) + integrand(T_HI));
    for k in 1..n {
        sum += integrand(T_LO + k as f64 * h);
    }
    let mut prev = sum * h;
    if !prev.is_finite() {
        return Err(Error::Numeric(format!("integrand not finite (sum {prev})")));
    }
    for _ in 0..12 {
        // Add the midpoints of the current grid.
        let mut mids = 0.0;
        for k in 0..n {
            mids += integrand(T_LO + (k as f64 + 0.5) * h);
        }
        sum += mids;
        n *= 2;
        h *= 0.5;
        let cur = sum * h;
        if !cur.is_finite() {
            return Err(Error::Numeric(format!("integrand not finite (sum {cur})")));
        }
        if (cur - prev).abs() <= rel_tol * cur.abs() + 1e-300 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::Numeric(format!(
        "trapezoid in log w did not reach relative tolerance {rel_tol:e}"
    )))
}

/// `log ∫ exp(psi(t)) dt` for a strictly concave `psi` with known mode
/// `t_star` and curvature `kappa = -psi''(t_star)`.
///
/// The grid is centred on the mode, extends until `psi` has dropped by
/// more than 42 on each side, and the step is halved until the log
/// integral is stable to `tol`.
pub fn log_integral_concave<P: FnMut(f64) -> f64>(
    mut psi: P,
    t_star: f64,
    kappa: f64,
    tol: f64,
) -> Result<f64> {
    const DROP: f64 = 42.0;
    let psi_star = psi(t_star);
    if !psi_star.is_finite() || !(kappa > 0.0) {
        return Err(Error::Numeric(format!(
            "log integral: mode value {psi_star}, curvature {kappa}"
        )));
    }
    // The cap keeps plateaus (tiny curvature at the mode) resolved.
    let mut h = (0.5 / libm::sqrt(kappa)).min(0.5);
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let mut sum = 1.0;
        for dir in [1.0, -1.0] {
            let mut k = 1.0;
            loop {
                let gap = psi_star - psi(t_star + dir * k * h);
                if !(gap <= DROP) {
                    break;
                }
                sum += libm::exp(-gap);
                k += 1.0;
            }
        }
        let cur = psi_star + libm::log(sum * h);
        if (cur - prev).abs() <= tol * (1.0 + cur.abs()) {
            return Ok(cur);
        }
        prev = cur;
        h *= 0.5;
    }
    Err(Error::Numeric(format!(
        "log integral did not stabilise to {tol:e}"
    )))
}
