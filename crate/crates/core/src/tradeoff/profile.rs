use alloc::format;

use super::analytic::{beta_c_closed_form, fc_survival};
use super::curve::PrivacyBudget;
use crate::mechanism::{diam_attribute, diam_individual, SupportBox};
use crate::roots::{brent, expand_bracket};
use crate::{Error, Result};

/// `δ_c(ε)`: the smallest δ such that `β_c` dominates the `(ε, δ)` envelope,
/// `1 - e^ε (1 - F_c(ε)) - β_c` evaluated at `h = ε/c`.
pub fn delta_profile(c: f64, epsilon: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must be positive and finite, got {c}")));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be finite and ≥ 0, got {epsilon}")));
    }
    let tail = fc_survival(epsilon, c)?;
    let scaled = if tail > 0.0 { libm::exp(epsilon + libm::log(tail)) } else { 0.0 };
    let beta = beta_c_closed_form(epsilon / c, c);
    Ok((1.0 - scaled - beta).max(0.0))
}

/// `δ̃_{c,δ}(ε) = 1 - (1-δ)(1 - δ_c(ε))` for zero mass δ.
pub fn delta_profile_zil(c: f64, epsilon: f64, zero_mass: f64) -> Result<f64> {
    if !(zero_mass > 0.0 && zero_mass < 1.0) {
        return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
    }
    let dc = delta_profile(c, epsilon)?;
    Ok(1.0 - (1.0 - zero_mass) * (1.0 - dc))
}

/// Attribute-level (neighbours differ in one attribute) or individual-level
/// (neighbours differ in a whole record) privacy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PrivacyMode {
    Adp,
    Dp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Calibration {
    pub c_prime: f64,
    pub lambda: f64,
    pub diameter: f64,
    pub mode: PrivacyMode,
    /// `δ̃_{c′,δ}(ε)` at the solution.
    pub achieved_delta_dp: f64,
}

/// Solves `δ̃_{c′,δ}(ε′) = δ′` for `c′` and converts it to the noise scale
/// `λ = diam / c′`.
pub fn calibrate(
    target: &PrivacyBudget,
    zero_mass: f64,
    support: &SupportBox,
    mode: PrivacyMode,
) -> Result<Calibration> {
    let target = PrivacyBudget::new(target.epsilon, target.delta_dp)?;
    if !(zero_mass > 0.0 && zero_mass < 1.0) {
        return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
    }
    if zero_mass >= target.delta_dp {
        return Err(Error::Infeasible(format!(
            "no c′ reaches delta_dp = {}: a solution exists only when zero_mass ({zero_mass}) < delta_dp",
            target.delta_dp
        )));
    }
    let diameter = match mode {
        PrivacyMode::Adp => diam_attribute(support)?,
        PrivacyMode::Dp => diam_individual(support)?,
    };
    let mut err = None;
    let mut g = |c: f64| match delta_profile_zil(c, target.epsilon, zero_mass) {
        Ok(v) => v - target.delta_dp,
        Err(e) => {
            err = Some(e);
            f64::NAN
        }
    };
    let (lo, hi, flo, fhi) = expand_bracket(&mut g, 0.1, 1.0, true, 200)?;
    let c_prime = brent(&mut g, lo, hi, flo, fhi, 1e-10, 200)?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Calibration {
        c_prime,
        lambda: diameter / c_prime,
        diameter,
        mode,
        achieved_delta_dp: delta_profile_zil(c_prime, target.epsilon, zero_mass)?,
    })
}
