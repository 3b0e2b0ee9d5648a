//! Loss functions and their DRCL / SL / sDRCL corrections.
//!
//! A loss sees one row split into `features` (the private, noised
//! attributes) and `publics` (attributes released as is). Laplacian
//! corrections only ever differentiate with respect to `features`.

use alloc::format;
use alloc::string::{String, ToString};
use core::f64::consts::PI;
use core::str::FromStr;

use crate::special::{log1p_exp_neg, logistic};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Smoothness {
    Nonsmooth,
    TwiceDifferentiableInX,
}

/// A loss `ℓ(x, θ)` with a θ-subgradient and, for losses twice
/// differentiable in `x`, the Laplacian `Σ_k ∂²ℓ/∂x_k²` over the features.
pub trait Loss: Sync {
    fn name(&self) -> String;

    /// Length of θ for rows with the given numbers of features and publics,
    /// or a data error if the loss cannot use such rows.
    fn num_params(&self, n_features: usize, n_publics: usize) -> Result<usize>;

    fn value(&self, features: &[f64], publics: &[f64], theta: &[f64]) -> f64;

    /// `grad += weight · ∂ℓ/∂θ` (a subgradient where ℓ has a kink).
    fn add_subgrad(&self, features: &[f64], publics: &[f64], theta: &[f64], weight: f64, grad: &mut [f64]);

    fn smoothness(&self) -> Smoothness;

    fn x_laplacian(&self, _features: &[f64], _publics: &[f64], _theta: &[f64]) -> Result<f64> {
        Err(Error::Capability {
            loss: self.name(),
            capability: "x_laplacian",
        })
    }

    /// `grad += weight · ∂/∂θ (Σ_k ∂²ℓ/∂x_k²)`.
    fn add_x_laplacian_grad(
        &self,
        _features: &[f64],
        _publics: &[f64],
        _theta: &[f64],
        _weight: f64,
        _grad: &mut [f64],
    ) -> Result<()> {
        Err(Error::Capability {
            loss: self.name(),
            capability: "x_laplacian_grad_theta",
        })
    }
}

/// The losses used in the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BuiltinLoss {
    /// `(θ - max(x, 0))²`
    MeanRelu,
    /// `(θ - 1{0.5 ≤ x ≤ 1})²`
    MeanIndicator,
    /// `(θ - |sin 2πx|)²`
    MeanAbsSin,
    /// Logistic regression of `y = publics[0]` on the other columns.
    Logistic,
    /// Least squares regression of `y = publics[0]` on the other columns.
    Linear,
    /// Check loss `ρ_τ(y - β₀ - zᵀβ)`; θ starts with the intercept.
    Check { tau: f64 },
    /// Univariate τ-quantile loss `(x - θ)(τ - 1{x < θ})`.
    Quantile { tau: f64 },
}

impl FromStr for BuiltinLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tau = |t: &str| -> Result<f64> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::param("tau", format!("cannot parse `{t}`")))?;
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param("tau", format!("must lie in (0, 1), got {v}")));
            }
            Ok(v)
        };
        let s = s.trim();
        Ok(match s {
            "mean-relu" => BuiltinLoss::MeanRelu,
            "mean-indicator" => BuiltinLoss::MeanIndicator,
            "mean-abssin" => BuiltinLoss::MeanAbsSin,
            "logistic" => BuiltinLoss::Logistic,
            "linear" => BuiltinLoss::Linear,
            "check" => BuiltinLoss::Check { tau: 0.5 },
            "quantile" => BuiltinLoss::Quantile { tau: 0.5 },
            _ => {
                if let Some(t) = s.strip_prefix("check:") {
                    BuiltinLoss::Check { tau: tau(t)? }
                } else if let Some(t) = s.strip_prefix("quantile:") {
                    BuiltinLoss::Quantile { tau: tau(t)? }
                } else {
                    return Err(Error::param(
                        "loss",
                        format!(
                            "unknown loss `{s}` (expected mean-relu, mean-indicator, mean-abssin, logistic, linear, check:<tau> or quantile:<tau>)"
                        ),
                    ));
                }
            }
        })
    }
}

impl BuiltinLoss {
    fn target(&self, x: f64) -> f64 {
        match self {
            BuiltinLoss::MeanRelu => x.max(0.0),
            BuiltinLoss::MeanIndicator => {
                if (0.5..=1.0).contains(&x) {
                    1.0
                } else {
                    0.0
                }
            }
            BuiltinLoss::MeanAbsSin => libm::sin(2.0 * PI * x).abs(),
            _ => unreachable!(),
        }
    }

    /// The true minimiser of the population risk for `X ~ U(0, 1)` (mean
    /// losses only).
    pub fn uniform_target(&self) -> Option<f64> {
        match self {
            BuiltinLoss::MeanRelu | BuiltinLoss::MeanIndicator => Some(0.5),
            BuiltinLoss::MeanAbsSin => Some(2.0 / PI),
            _ => None,
        }
    }

    fn is_mean(&self) -> bool {
        matches!(self, BuiltinLoss::MeanRelu | BuiltinLoss::MeanIndicator | BuiltinLoss::MeanAbsSin)
    }
}

/// `zᵀβ` over features followed by publics[1..].
#[inline]
fn linear_predictor(features: &[f64], publics: &[f64], beta: &[f64]) -> f64 {
    let nf = features.len();
    let mut u = 0.0;
    for k in 0..nf {
        u += features[k] * beta[k];
    }
    for (k, z) in publics.iter().skip(1).enumerate() {
        u += z * beta[nf + k];
    }
    u
}

#[inline]
fn add_covariates(features: &[f64], publics: &[f64], scale: f64, grad: &mut [f64]) {
    let nf = features.len();
    for k in 0..nf {
        grad[k] += scale * features[k];
    }
    for (k, z) in publics.iter().skip(1).enumerate() {
        grad[nf + k] += scale * z;
    }
}

#[inline]
fn check_weight(r: f64, tau: f64) -> f64 {
    // 1(r < 0) is 0 at the kink.
    if r < 0.0 {
        tau - 1.0
    } else {
        tau
    }
}

impl Loss for BuiltinLoss {
    fn name(&self) -> String {
        match self {
            BuiltinLoss::MeanRelu => "mean-relu".to_string(),
            BuiltinLoss::MeanIndicator => "mean-indicator".to_string(),
            BuiltinLoss::MeanAbsSin => "mean-abssin".to_string(),
            BuiltinLoss::Logistic => "logistic".to_string(),
            BuiltinLoss::Linear => "linear".to_string(),
            BuiltinLoss::Check { tau } => format!("check:{tau}"),
            BuiltinLoss::Quantile { tau } => format!("quantile:{tau}"),
        }
    }

    fn num_params(&self, n_features: usize, n_publics: usize) -> Result<usize> {
        if n_features == 0 {
            return Err(Error::Data(format!("loss `{}` needs at least one private column", self.name())));
        }
        match self {
            _ if self.is_mean() || matches!(self, BuiltinLoss::Quantile { .. }) => {
                if n_features != 1 {
                    return Err(Error::Data(format!(
                        "loss `{}` is univariate but the data has {n_features} private columns",
                        self.name()
                    )));
                }
                Ok(1)
            }
            BuiltinLoss::Logistic | BuiltinLoss::Linear | BuiltinLoss::Check { .. } => {
                if n_publics == 0 {
                    return Err(Error::Data(format!(
                        "loss `{}` needs the response as the first public column",
                        self.name()
                    )));
                }
                let p = n_features + n_publics - 1;
                Ok(if matches!(self, BuiltinLoss::Check { .. }) { p + 1 } else { p })
            }
            _ => unreachable!(),
        }
    }

    fn value(&self, features: &[f64], publics: &[f64], theta: &[f64]) -> f64 {
        match *self {
            BuiltinLoss::MeanRelu | BuiltinLoss::MeanIndicator | BuiltinLoss::MeanAbsSin => {
                let e = theta[0] - self.target(features[0]);
                e * e
            }
            BuiltinLoss::Logistic => {
                let u = linear_predictor(features, publics, theta);
                (1.0 - publics[0]) * u + log1p_exp_neg(u)
            }
            BuiltinLoss::Linear => {
                let r = publics[0] - linear_predictor(features, publics, theta);
                r * r
            }
            BuiltinLoss::Check { tau } => {
                let r = publics[0] - theta[0] - linear_predictor(features, publics, &theta[1..]);
                r * check_weight(r, tau)
            }
            BuiltinLoss::Quantile { tau } => {
                let r = features[0] - theta[0];
                r * check_weight(r, tau)
            }
        }
    }

    fn add_subgrad(&self, features: &[f64], publics: &[f64], theta: &[f64], weight: f64, grad: &mut [f64]) {
        match *self {
            BuiltinLoss::MeanRelu | BuiltinLoss::MeanIndicator | BuiltinLoss::MeanAbsSin => {
                grad[0] += weight * 2.0 * (theta[0] - self.target(features[0]));
            }
            BuiltinLoss::Logistic => {
                let u = linear_predictor(features, publics, theta);
                add_covariates(features, publics, weight * (logistic(u) - publics[0]), grad);
            }
            BuiltinLoss::Linear => {
                let r = publics[0] - linear_predictor(features, publics, theta);
                add_covariates(features, publics, -2.0 * weight * r, grad);
            }
            BuiltinLoss::Check { tau } => {
                let r = publics[0] - theta[0] - linear_predictor(features, publics, &theta[1..]);
                let g = -weight * check_weight(r, tau);
                grad[0] += g;
                add_covariates(features, publics, g, &mut grad[1..]);
            }
            BuiltinLoss::Quantile { tau } => {
                let r = features[0] - theta[0];
                grad[0] -= weight * check_weight(r, tau);
            }
        }
    }

    fn smoothness(&self) -> Smoothness {
        match self {
            BuiltinLoss::Logistic | BuiltinLoss::Linear => Smoothness::TwiceDifferentiableInX,
            _ => Smoothness::Nonsmooth,
        }
    }

    fn x_laplacian(&self, features: &[f64], publics: &[f64], theta: &[f64]) -> Result<f64> {
        let nf = features.len();
        let b2: f64 = theta[..nf].iter().map(|b| b * b).sum();
        match self {
            BuiltinLoss::Logistic => {
                let s = logistic(linear_predictor(features, publics, theta));
                Ok(b2 * s * (1.0 - s))
            }
            BuiltinLoss::Linear => Ok(2.0 * b2),
            _ => Err(Error::Capability {
                loss: self.name(),
                capability: "x_laplacian",
            }),
        }
    }

    fn add_x_laplacian_grad(
        &self,
        features: &[f64],
        publics: &[f64],
        theta: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let nf = features.len();
        match self {
            BuiltinLoss::Logistic => {
                let b2: f64 = theta[..nf].iter().map(|b| b * b).sum();
                let s = logistic(linear_predictor(features, publics, theta));
                let q = s * (1.0 - s);
                for k in 0..nf {
                    grad[k] += weight * 2.0 * theta[k] * q;
                }
                add_covariates(features, publics, weight * b2 * q * (1.0 - 2.0 * s), grad);
                Ok(())
            }
            BuiltinLoss::Linear => {
                for k in 0..nf {
                    grad[k] += weight * 4.0 * theta[k];
                }
                Ok(())
            }
            _ => Err(Error::Capability {
                loss: self.name(),
                capability: "x_laplacian_grad_theta",
            }),
        }
    }
}

fn check_zero_mass(zero_mass: f64) -> Result<()> {
    if !(zero_mass > 0.0 && zero_mass <= 1.0) {
        return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
    }
    Ok(())
}

fn require_smooth<L: Loss + ?Sized>(loss: &L) -> Result<()> {
    if loss.smoothness() != Smoothness::TwiceDifferentiableInX {
        return Err(Error::Capability {
            loss: loss.name(),
            capability: "x_laplacian",
        });
    }
    Ok(())
}

/// Doubly random corrected loss `(1 - 1/δ) ℓ(x2, θ) + (1/δ) ℓ(x1, θ)`.
///
/// δ = 1 is accepted and gives `ℓ(x1, θ)`.
pub fn drcl_value<L: Loss + ?Sized>(
    loss: &L,
    x1: &[f64],
    x2: &[f64],
    publics: &[f64],
    theta: &[f64],
    zero_mass: f64,
) -> Result<f64> {
    check_zero_mass(zero_mass)?;
    let w1 = 1.0 / zero_mass;
    let v1 = loss.value(x1, publics, theta);
    if zero_mass == 1.0 {
        return Ok(v1);
    }
    Ok((1.0 - w1) * loss.value(x2, publics, theta) + w1 * v1)
}

pub fn drcl_subgrad<L: Loss + ?Sized>(
    loss: &L,
    x1: &[f64],
    x2: &[f64],
    publics: &[f64],
    theta: &[f64],
    zero_mass: f64,
    grad: &mut [f64],
) -> Result<()> {
    check_zero_mass(zero_mass)?;
    let w1 = 1.0 / zero_mass;
    loss.add_subgrad(x1, publics, theta, w1, grad);
    if zero_mass < 1.0 {
        loss.add_subgrad(x2, publics, theta, 1.0 - w1, grad);
    }
    Ok(())
}

/// SL corrected loss `ℓ(x2, θ) - (λ²/2) Σ_k ∂²ℓ/∂x_k²(x2, θ)`.
pub fn sl_corrected_value<L: Loss + ?Sized>(
    loss: &L,
    x2: &[f64],
    publics: &[f64],
    theta: &[f64],
    lambda: f64,
) -> Result<f64> {
    require_smooth(loss)?;
    Ok(loss.value(x2, publics, theta) - 0.5 * lambda * lambda * loss.x_laplacian(x2, publics, theta)?)
}

pub fn sl_corrected_subgrad<L: Loss + ?Sized>(
    loss: &L,
    x2: &[f64],
    publics: &[f64],
    theta: &[f64],
    lambda: f64,
    grad: &mut [f64],
) -> Result<()> {
    require_smooth(loss)?;
    loss.add_subgrad(x2, publics, theta, 1.0, grad);
    loss.add_x_laplacian_grad(x2, publics, theta, -0.5 * lambda * lambda, grad)
}

/// sDRCL `ℓ(x1, θ) - ((1-δ)λ²/2) Σ_k ∂²ℓ/∂x_k²(x2, θ)`.
pub fn sdrcl_value<L: Loss + ?Sized>(
    loss: &L,
    x1: &[f64],
    x2: &[f64],
    publics: &[f64],
    theta: &[f64],
    zero_mass: f64,
    lambda: f64,
) -> Result<f64> {
    require_smooth(loss)?;
    check_zero_mass(zero_mass)?;
    let k = 0.5 * (1.0 - zero_mass) * lambda * lambda;
    Ok(loss.value(x1, publics, theta) - k * loss.x_laplacian(x2, publics, theta)?)
}

#[allow(clippy::too_many_arguments)]
pub fn sdrcl_subgrad<L: Loss + ?Sized>(
    loss: &L,
    x1: &[f64],
    x2: &[f64],
    publics: &[f64],
    theta: &[f64],
    zero_mass: f64,
    lambda: f64,
    grad: &mut [f64],
) -> Result<()> {
    require_smooth(loss)?;
    check_zero_mass(zero_mass)?;
    let k = 0.5 * (1.0 - zero_mass) * lambda * lambda;
    loss.add_subgrad(x1, publics, theta, 1.0, grad);
    loss.add_x_laplacian_grad(x2, publics, theta, -k, grad)
}

/// Which corrected loss an estimator minimises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    /// `ℓ` on whatever rows it is given.
    Plain,
    Drcl { zero_mass: f64 },
    /// With `strict = false`, losses without a Laplacian are corrected by
    /// zero, i.e. fall back to `ℓ(x2, θ)`.
    Sl { lambda: f64, strict: bool },
    Sdrcl { zero_mass: f64, lambda: f64 },
}

impl Correction {
    /// True when the corrected objective can be nonconvex in θ even for a
    /// convex loss (negative weights or subtracted curvature).
    pub fn possibly_nonconvex(&self) -> bool {
        !matches!(self, Correction::Plain)
    }

    /// Whether the correction reads `x1` and/or `x2`.
    pub fn uses(&self) -> (bool, bool) {
        match self {
            Correction::Plain => (true, false),
            Correction::Drcl { .. } | Correction::Sdrcl { .. } => (true, true),
            Correction::Sl { .. } => (false, true),
        }
    }

    /// Capability check of `loss` against this correction.
    pub fn validate<L: Loss + ?Sized>(&self, loss: &L) -> Result<()> {
        match *self {
            Correction::Plain => Ok(()),
            Correction::Drcl { zero_mass } => {
                if !(zero_mass > 0.0 && zero_mass < 1.0) {
                    return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
                }
                Ok(())
            }
            Correction::Sl { lambda, strict } => {
                if !(lambda >= 0.0) {
                    return Err(Error::param("lambda", format!("must be ≥ 0, got {lambda}")));
                }
                if strict {
                    require_smooth(loss)?;
                }
                Ok(())
            }
            Correction::Sdrcl { zero_mass, lambda } => {
                if !(zero_mass > 0.0 && zero_mass < 1.0) {
                    return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
                }
                if !(lambda >= 0.0) {
                    return Err(Error::param("lambda", format!("must be ≥ 0, got {lambda}")));
                }
                require_smooth(loss)
            }
        }
    }

    /// Corrected loss for one row. `x1`/`x2` may be empty when unused.
    /// Call [`Correction::validate`] first.
    #[inline]
    pub fn value<L: Loss + ?Sized>(&self, loss: &L, x1: &[f64], x2: &[f64], publics: &[f64], theta: &[f64]) -> f64 {
        match *self {
            Correction::Plain => loss.value(x1, publics, theta),
            Correction::Drcl { zero_mass } => {
                let w1 = 1.0 / zero_mass;
                (1.0 - w1) * loss.value(x2, publics, theta) + w1 * loss.value(x1, publics, theta)
            }
            Correction::Sl { lambda, .. } => {
                let lap = loss.x_laplacian(x2, publics, theta).unwrap_or(0.0);
                loss.value(x2, publics, theta) - 0.5 * lambda * lambda * lap
            }
            Correction::Sdrcl { zero_mass, lambda } => {
                let lap = loss.x_laplacian(x2, publics, theta).unwrap_or(0.0);
                loss.value(x1, publics, theta) - 0.5 * (1.0 - zero_mass) * lambda * lambda * lap
            }
        }
    }

    /// `grad += weight · ∂/∂θ` of the corrected loss for one row.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn add_subgrad<L: Loss + ?Sized>(
        &self,
        loss: &L,
        x1: &[f64],
        x2: &[f64],
        publics: &[f64],
        theta: &[f64],
        weight: f64,
        grad: &mut [f64],
    ) {
        match *self {
            Correction::Plain => loss.add_subgrad(x1, publics, theta, weight, grad),
            Correction::Drcl { zero_mass } => {
                let w1 = 1.0 / zero_mass;
                loss.add_subgrad(x1, publics, theta, weight * w1, grad);
                loss.add_subgrad(x2, publics, theta, weight * (1.0 - w1), grad);
            }
            Correction::Sl { lambda, .. } => {
                loss.add_subgrad(x2, publics, theta, weight, grad);
                let _ = loss.add_x_laplacian_grad(x2, publics, theta, -0.5 * weight * lambda * lambda, grad);
            }
            Correction::Sdrcl { zero_mass, lambda } => {
                loss.add_subgrad(x1, publics, theta, weight, grad);
                let k = 0.5 * (1.0 - zero_mass) * lambda * lambda;
                let _ = loss.add_x_laplacian_grad(x2, publics, theta, -weight * k, grad);
            }
        }
    }
}
