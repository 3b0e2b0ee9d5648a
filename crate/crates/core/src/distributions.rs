//! Samplers and densities: SL / ZIL noise, truncated normals, Laplace.
//!
//! Rows are produced in fixed-size chunks, each from its own sub-stream of
//! the caller's [`RngStream`], so a chunk can be regenerated (or generated
//! on another thread) without touching the others.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::quadrature::log_integral_concave;
use crate::special::{norm_cdf, norm_quantile, norm_sf};
use crate::{Error, Result, RngStream, RowMatrix};

/// Rows per independently seeded chunk.
pub const CHUNK_ROWS: usize = 4096;

/// Parameters of ZIL(δ, λ²I): zero-inflation mass δ and scale λ.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseParams {
    pub zero_mass: f64,
    pub scale: f64,
}

impl NoiseParams {
    pub fn new(zero_mass: f64, scale: f64) -> Result<Self> {
        let p = NoiseParams { zero_mass, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zero_mass > 0.0 && self.zero_mass < 1.0) {
            return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {}", self.zero_mass)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::param("scale", format!("must be positive and finite, got {}", self.scale)));
        }
        Ok(())
    }
}

fn check_dims(d: usize, n: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if n == 0 {
        return Err(Error::param("n", "sample size must be at least 1"));
    }
    Ok(())
}

fn check_variance(variance: f64) -> Result<()> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::param("variance", format!("must be positive and finite, got {variance}")));
    }
    Ok(())
}

/// One SL_d(v I) draw `√W X` written into `out`.
#[inline]
pub fn draw_sl<R: Rng + ?Sized>(rng: &mut R, variance: f64, out: &mut [f64]) {
    let w: f64 = rng.sample(Exp1);
    let s = libm::sqrt(w * variance);
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = s * z;
    }
}

/// One ZIL draw; returns `false` (and zeroes `out`) on the zero event.
#[inline]
pub fn draw_zil<R: Rng + ?Sized>(rng: &mut R, params: &NoiseParams, out: &mut [f64]) -> bool {
    let u: f64 = rng.random();
    if u < params.zero_mass {
        out.iter_mut().for_each(|o| *o = 0.0);
        false
    } else {
        draw_sl(rng, params.scale * params.scale, out);
        true
    }
}

/// Fills an `n × d` matrix chunk by chunk, chunk `k` drawing from
/// `rng.substream(k)`.
fn fill_chunked<F>(n: usize, d: usize, rng: &RngStream, mut row_fn: F) -> RowMatrix
where
    F: FnMut(&mut rand_chacha::ChaCha8Rng, &mut [f64]),
{
    let mut out = RowMatrix::zeros(n, d);
    let mut start = 0;
    let mut chunk = 0u64;
    while start < n {
        let end = (start + CHUNK_ROWS).min(n);
        let mut r = rng.substream(chunk).rng();
        for i in start..end {
            row_fn(&mut r, out.row_mut(i));
        }
        start = end;
        chunk += 1;
    }
    out
}

/// `n` i.i.d. rows of SL_d(variance · I_d).
pub fn sample_sl(d: usize, variance: f64, n: usize, rng: &RngStream) -> Result<RowMatrix> {
    check_dims(d, n)?;
    check_variance(variance)?;
    Ok(fill_chunked(n, d, rng, |r, row| draw_sl(r, variance, row)))
}

/// `n` i.i.d. rows of ZIL(δ, λ² I_d).
pub fn sample_zil(d: usize, params: &NoiseParams, n: usize, rng: &RngStream) -> Result<RowMatrix> {
    check_dims(d, n)?;
    params.validate()?;
    Ok(fill_chunked(n, d, rng, |r, row| {
        draw_zil(r, params, row);
    }))
}

/// Log density of SL_d(v I) at `x`, from the normal scale mixture
/// `∫₀^∞ (2πwv)^{-d/2} exp(-‖x‖²/(2wv)) e^{-w} dw`.
///
/// The integral is taken in `t = ln w`, where the log integrand
/// `ψ(t) = -(d/2)ln(2πv) + (1 - d/2)t - a e^{-t} - e^t` (with
/// `a = ‖x‖²/(2v)`) is strictly concave and its mode is available in
/// closed form.
pub fn sl_log_density(x: &[f64], variance: f64) -> Result<f64> {
    check_variance(variance)?;
    let d = x.len();
    if d == 0 {
        return Err(Error::param("x", "empty vector"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite point {x:?}")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    sl_log_density_r2(d, r2, variance)
}

/// [`sl_log_density`] from the squared norm alone.
pub fn sl_log_density_r2(d: usize, r2: f64, variance: f64) -> Result<f64> {
    let a = r2 / (2.0 * variance);
    let b = 1.0 - 0.5 * d as f64;
    if a == 0.0 && b <= 0.0 {
        return Err(Error::Singular { dim: d });
    }
    // Mode u* = e^{t*} solves u² - b u - a = 0.
    let disc = libm::sqrt(b * b + 4.0 * a);
    let u_star = if b >= 0.0 {
        0.5 * (b + disc)
    } else {
        2.0 * a / (disc - b)
    };
    let t_star = libm::log(u_star);
    let kappa = a / u_star + u_star;
    let c0 = -0.5 * d as f64 * libm::log(2.0 * PI * variance);
    let psi = |t: f64| c0 + b * t - a * libm::exp(-t) - libm::exp(t);
    log_integral_concave(psi, t_star, kappa, 1e-13)
}

/// Independent standard normal coordinates truncated to `[lower_j, upper_j]`,
/// by inversion of the normal CDF on each coordinate.
pub fn sample_truncated_normal(
    lower: &[f64],
    upper: &[f64],
    n: usize,
    rng: &RngStream,
) -> Result<RowMatrix> {
    if lower.len() != upper.len() {
        return Err(Error::param("upper", "bounds have different lengths"));
    }
    check_dims(lower.len(), n)?;
    for (j, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
        if !(lo < hi) {
            return Err(Error::param("lower", format!("empty interval [{lo}, {hi}] in coordinate {j}")));
        }
    }
    // Work in whichever tail keeps the CDF values away from 1.
    let plan: Vec<(bool, f64, f64)> = lower
        .iter()
        .zip(upper)
        .map(|(&lo, &hi)| {
            if lo > 0.0 {
                (true, norm_cdf(-hi), norm_cdf(-lo))
            } else {
                (false, norm_cdf(lo), norm_cdf(hi))
            }
        })
        .collect();
    Ok(fill_chunked(n, lower.len(), rng, |r, row| {
        for (o, &(flip, pa, pb)) in row.iter_mut().zip(&plan) {
            let u: f64 = r.random();
            let z = norm_quantile(pa + u * (pb - pa));
            *o = if flip { -z } else { z };
        }
    }))
}

/// CDF of the standard Laplace L(1), density `e^{-|t|}/2`.
pub fn laplace_cdf(t: f64) -> f64 {
    if t < 0.0 {
        0.5 * libm::exp(t)
    } else {
        1.0 - 0.5 * libm::exp(-t)
    }
}

/// Survival function of L(1); exact in the upper tail.
pub fn laplace_sf(t: f64) -> f64 {
    laplace_cdf(-t)
}

pub fn laplace_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1), got {p}")));
    }
    Ok(if p < 0.5 {
        libm::log(2.0 * p)
    } else {
        -libm::log(2.0 * (1.0 - p))
    })
}

/// Mean and variance of N(0, 1) truncated to `[a, b]`.
pub fn truncated_normal_moments(a: f64, b: f64) -> (f64, f64) {
    let (pa, pb) = (crate::special::norm_pdf(a), crate::special::norm_pdf(b));
    let z = if a > 0.0 { norm_sf(a) - norm_sf(b) } else { norm_cdf(b) - norm_cdf(a) };
    let term = |x: f64, p: f64| if x.is_finite() { x * p } else { 0.0 };
    let mean = (pa - pb) / z;
    let var = 1.0 + (term(a, pa) - term(b, pb)) / z - mean * mean;
    (mean, var)
}
