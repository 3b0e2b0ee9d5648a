use alloc::format;
use alloc::vec::Vec;

use super::curve::{PrivacyBudget, TradeoffCurve};
use crate::distributions::{laplace_cdf, laplace_quantile};
use crate::quadrature::exp_weighted;
use crate::roots::{brent, expand_bracket};
use crate::special::{norm_cdf, norm_sf};
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-13;

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must be positive and finite, got {c}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

fn check_zero_mass(zero_mass: f64) -> Result<()> {
    if !(zero_mass > 0.0 && zero_mass < 1.0) {
        return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
    }
    Ok(())
}

/// The `(ε, δ)`-DP trade-off `max{0, 1-δ-e^ε α, e^{-ε}(1-δ-α)}`.
pub fn f_eps_delta(alpha: f64, budget: &PrivacyBudget) -> Result<f64> {
    check_alpha(alpha)?;
    let PrivacyBudget { epsilon, delta_dp } = *budget;
    let a = 1.0 - delta_dp - libm::exp(epsilon) * alpha;
    let b = libm::exp(-epsilon) * (1.0 - delta_dp - alpha);
    Ok(a.max(b).max(0.0))
}

/// `F_c(x) = ∫₀^∞ Φ(√w x/c + c/(2√w)) e^{-w} dw`, the null CDF of the
/// limiting log-likelihood ratio.
pub fn fc(x: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if x.is_nan() {
        return Err(Error::param("x", "NaN"));
    }
    let r = x / c;
    exp_weighted(
        |w| {
            let sw = libm::sqrt(w);
            norm_cdf(sw * r + c / (2.0 * sw))
        },
        QUAD_TOL,
    )
}

/// `1 - F_c(x)`, computed directly so that it keeps relative accuracy in
/// the upper tail.
pub fn fc_survival(x: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if x.is_nan() {
        return Err(Error::param("x", "NaN"));
    }
    let r = x / c;
    exp_weighted(
        |w| {
            let sw = libm::sqrt(w);
            norm_sf(sw * r + c / (2.0 * sw))
        },
        QUAD_TOL,
    )
}

fn solve_monotone<F: FnMut(f64) -> f64>(mut g: F, c: f64) -> Result<f64> {
    let (lo, hi, flo, fhi) = expand_bracket(&mut g, -c, c, false, 200)?;
    brent(&mut g, lo, hi, flo, fhi, 1e-13 * (1.0 + lo.abs().max(hi.abs()).min(1e6)), 300)
}

/// `F_c^{-1}(p)`. The upper half is solved on the survival function.
pub fn fc_inverse(p: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if p == 0.0 || p == 1.0 {
        return Err(Error::Domain(format!("F_c quantile at p = {p} is infinite")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::param("p", format!("must lie in (0, 1), got {p}")));
    }
    if p > 0.5 {
        return fc_upper_quantile(1.0 - p, c);
    }
    let mut err = None;
    let x = solve_monotone(
        |x| match fc(x, c) {
            Ok(v) => v - p,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        c,
    );
    match err {
        Some(e) => Err(e),
        None => x,
    }
}

/// `x` with `1 - F_c(x) = q`, i.e. `F_c^{-1}(1 - q)` without forming `1 - q`.
pub fn fc_upper_quantile(q: f64, c: f64) -> Result<f64> {
    check_c(c)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("upper quantile at q = {q} is not finite")));
    }
    if q > 0.5 {
        return fc_inverse(1.0 - q, c);
    }
    let mut err = None;
    // Work on the log scale: the survival function spans many decades.
    let lq = libm::log(q);
    let x = solve_monotone(
        |x| match fc_survival(x, c) {
            Ok(v) if v > 0.0 => lq - libm::log(v),
            Ok(_) => f64::INFINITY,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        c,
    );
    match err {
        Some(e) => Err(e),
        None => x,
    }
}

/// `β_c` from `h = F_c^{-1}(1-α)/c`:
/// `[1 + {√2/(h + √(2+h²))}²]^{-1} exp{-c/(h + √(2+h²))}`,
/// rearranged so neither tail suffers cancellation.
pub fn beta_c_closed_form(h: f64, c: f64) -> f64 {
    let s = libm::sqrt(2.0 + h * h);
    // s + h and s - h multiply to 2.
    let (sum, diff) = if h >= 0.0 { (s + h, 2.0 / (s + h)) } else { (2.0 / (s - h), s - h) };
    0.5 * (sum / s) * libm::exp(-0.5 * c * diff)
}

/// Limiting trade-off `β_c(α) = ∫₀^∞ Φ{√w F_c^{-1}(1-α)/c - c/(2√w)} e^{-w} dw`.
///
/// The integral is cross-checked against [`beta_c_closed_form`]; a
/// disagreement above 1e-6 is reported as a numerical failure.
pub fn beta_c(alpha: f64, c: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_c(c)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let x = fc_upper_quantile(alpha, c)?;
    let r = x / c;
    let integral = exp_weighted(
        |w| {
            let sw = libm::sqrt(w);
            norm_cdf(sw * r - c / (2.0 * sw))
        },
        QUAD_TOL,
    )?;
    let closed = beta_c_closed_form(r, c);
    if (integral - closed).abs() > 1e-6 {
        return Err(Error::Numeric(format!(
            "beta_c({alpha}, {c}): integral {integral} and closed form {closed} disagree"
        )));
    }
    Ok(integral)
}

/// `(1-δ) β_c(α/(1-δ))` for `α ≤ 1-δ`, and 0 beyond.
pub fn beta_c_delta(alpha: f64, c: f64, zero_mass: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_c(c)?;
    check_zero_mass(zero_mass)?;
    let keep = 1.0 - zero_mass;
    if alpha > keep {
        return Ok(0.0);
    }
    Ok(keep * beta_c((alpha / keep).min(1.0), c)?)
}

/// Exact one-dimensional trade-off `F_Lap(F_Lap^{-1}(1-α) - √2 c)`.
pub fn t1c_closed_form(alpha: f64, c: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_c(c)?;
    if alpha == 0.0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        return Ok(0.0);
    }
    // F_Lap^{-1}(1-α) = -F_Lap^{-1}(α)
    let q = -laplace_quantile(alpha)?;
    Ok(laplace_cdf(q - core::f64::consts::SQRT_2 * c))
}

/// `β_c` sampled on `alphas`.
pub fn beta_c_curve(c: f64, alphas: Vec<f64>) -> Result<TradeoffCurve> {
    TradeoffCurve::from_fn(alphas, format!("beta_c={c}"), |a| beta_c(a, c))
}

/// `β_{c,δ}` sampled on `alphas`.
pub fn beta_c_delta_curve(c: f64, zero_mass: f64, alphas: Vec<f64>) -> Result<TradeoffCurve> {
    check_zero_mass(zero_mass)?;
    TradeoffCurve::from_fn(alphas, format!("beta_c={c},zero_mass={zero_mass}"), |a| {
        beta_c_delta(a, c, zero_mass)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tradeoff::alpha_grid;
    use crate::RngStream;
    use rand::Rng;
    use rand_distr::{Exp1, StandardNormal};

    /// Closed-form null CDF of `cX/√W - c²/(2W)`.
    fn fc_oracle(x: f64, c: f64) -> f64 {
        let h = x / c;
        let s = (2.0 + h * h).sqrt();
        1.0 - 0.5 * (-(c / 2.0) * (h + s)).exp() * (1.0 - h / s)
    }

    #[test]
    fn fc_matches_closed_form() {
        for &c in &[0.2, 0.5, 1.0, 3.0] {
            for &x in &[-8.0, -2.0, -0.3, 0.0, 0.4, 2.0, 7.0] {
                let v = fc(x, c).unwrap();
                assert!((v - fc_oracle(x, c)).abs() < 1e-10, "c={c} x={x}: {v}");
                let s = fc_survival(x, c).unwrap();
                assert!((v + s - 1.0).abs() < 1e-12);
            }
        }
        assert!(fc(-1e6 * 0.5, 0.5).unwrap() < 1e-6);
        assert!(fc(1e3, 0.5).unwrap() > 1.0 - 1e-9);
        assert!(fc(0.0, 0.0).is_err());
    }

    #[test]
    fn fc_matches_simulation() {
        // P(X/√W - 1/(2W) ≤ 0) for c = 1
        let mut r = RngStream::new(2024, 0).rng();
        let n = 400_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let w: f64 = r.sample(Exp1);
            let x: f64 = r.sample(StandardNormal);
            if x / w.sqrt() - 1.0 / (2.0 * w) <= 0.0 {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - fc(0.0, 1.0).unwrap()).abs() < 3.0 * se);
    }

    #[test]
    fn quantile_roundtrip() {
        for &c in &[0.5, 1.0] {
            for &x in &[-2.0, 0.0, 2.0] {
                let p = fc(x, c).unwrap();
                assert!((fc_inverse(p, c).unwrap() - x).abs() < 1e-8);
            }
        }
        let x = fc_inverse(0.999_999, 0.5).unwrap();
        assert!((fc(x, 0.5).unwrap() - 0.999_999).abs() < 1e-10);
        assert!(matches!(fc_inverse(1.0, 0.5), Err(Error::Domain(_))));
        assert!(matches!(fc_inverse(0.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_endpoints_and_symmetry() {
        assert_eq!(beta_c(0.0, 0.5).unwrap(), 1.0);
        assert_eq!(beta_c(1.0, 0.5).unwrap(), 0.0);
        for &c in &[0.2, 1.0] {
            for a in alpha_grid(21).into_iter().skip(1).take(19) {
                let b = beta_c(a, c).unwrap();
                assert!((beta_c(b, c).unwrap() - a).abs() < 1e-6);
                assert!(b <= 1.0 - a);
            }
        }
    }

    #[test]
    fn closed_form_tails() {
        // h very negative: β is tiny but still resolved
        let b = beta_c_closed_form(-100.0, 0.5);
        let expect = 9.618_228_470_449_364e-27;
        assert!(b > 0.0 && ((b - expect) / expect).abs() < 1e-6, "{b} {expect}");
        let b = beta_c_closed_form(1e8, 0.5);
        assert!(b > 1.0 - 1e-8 && b <= 1.0);
    }

    #[test]
    fn zero_mass_shrink() {
        let d = 0.05;
        assert!((beta_c_delta(0.0, 0.5, d).unwrap() - 0.95).abs() < 1e-15);
        assert_eq!(beta_c_delta(0.96, 0.5, d).unwrap(), 0.0);
        assert!(beta_c_delta(0.95, 0.5, d).unwrap().abs() < 1e-12);
        assert!(beta_c_delta(0.95 - 1e-9, 0.5, d).unwrap() < 1e-6);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let v = t1c_closed_form(0.5, 1.0).unwrap();
        assert!((v - 0.5 * (-core::f64::consts::SQRT_2).exp()).abs() < 1e-15);
        assert!(t1c_closed_form(1e-12, 1.0).unwrap() > 1.0 - 1e-10);
        for a in alpha_grid(51) {
            let b = t1c_closed_form(a, 0.7).unwrap();
            assert!((t1c_closed_form(b, 0.7).unwrap() - a).abs() < 1e-10);
        }
    }

    #[test]
    fn envelope_values() {
        let b = PrivacyBudget::new(0.0, 0.0).unwrap();
        assert!((f_eps_delta(0.3, &b).unwrap() - 0.7).abs() < 1e-15);
        let b = PrivacyBudget::new(0.8, 0.17).unwrap();
        assert!((f_eps_delta(0.0, &b).unwrap() - 0.83).abs() < 1e-15);
        assert_eq!(f_eps_delta(0.9, &b).unwrap(), 0.0);
        assert!(f_eps_delta(1.1, &b).is_err());
    }
}
