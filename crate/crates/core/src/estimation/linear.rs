use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::estimator::Method;
use crate::distributions::NoiseParams;
use crate::{Error, Result};

/// Linear model `Y = Xᵀθ + ε` with `E X = 0`, `E XXᵀ = Σ_x`, `Var ε = σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelSpec {
    pub sigma_x: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub theta: Vec<f64>,
    pub params: NoiseParams,
}

impl LinearModelSpec {
    fn checked(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let p = self.theta.len();
        if p == 0 || self.sigma_x.len() != p || self.sigma_x.iter().any(|r| r.len() != p) {
            return Err(Error::param("sigma_x", "must be a p × p matrix matching theta"));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::param("sigma2", "must be ≥ 0"));
        }
        if !(self.params.zero_mass > 0.0 && self.params.zero_mass < 1.0) {
            return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {}", self.params.zero_mass)));
        }
        if !(self.params.scale >= 0.0) {
            return Err(Error::param("scale", "must be ≥ 0"));
        }
        let s = DMatrix::from_fn(p, p, |r, c| self.sigma_x[r][c]);
        if (&s - s.transpose()).amax() > 1e-12 * (1.0 + s.amax()) {
            return Err(Error::param("sigma_x", "must be symmetric"));
        }
        if s.clone().cholesky().is_none() {
            return Err(Error::param("sigma_x", "must be positive definite"));
        }
        let theta = DMatrix::from_column_slice(p, 1, &self.theta);
        Ok((s, theta))
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect()).collect()
}

/// `V = λ²‖θ‖²Σ_x + σ²λ²I + 2λ⁴‖θ‖²I + (2+δ)λ⁴θθᵀ`.
pub fn linear_v_matrix(spec: &LinearModelSpec) -> Result<Vec<Vec<f64>>> {
    let (s, theta) = spec.checked()?;
    Ok(to_rows(&v_matrix(spec, &s, &theta)))
}

fn v_matrix(spec: &LinearModelSpec, s: &DMatrix<f64>, theta: &DMatrix<f64>) -> DMatrix<f64> {
    let p = s.nrows();
    let (l2, d) = (spec.params.scale * spec.params.scale, spec.params.zero_mass);
    let t2 = theta.norm_squared();
    let eye = DMatrix::<f64>::identity(p, p);
    s * (l2 * t2) + &eye * (spec.sigma2 * l2 + 2.0 * l2 * l2 * t2) + theta * theta.transpose() * ((2.0 + d) * l2 * l2)
}

/// Asymptotic covariance of `√n(θ̂ - θ)` for the SL, DRCL and sDRCL
/// least-squares estimators.
pub fn linear_asyvar(method: Method, spec: &LinearModelSpec) -> Result<Vec<Vec<f64>>> {
    let (s, theta) = spec.checked()?;
    let p = s.nrows();
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::param("sigma_x", "not invertible"))?;
    let (l2, d) = (spec.params.scale * spec.params.scale, spec.params.zero_mass);
    let t2 = theta.norm_squared();
    let eye = DMatrix::<f64>::identity(p, p);
    let middle = &s * (spec.sigma2 + l2 * t2)
        + &eye * (spec.sigma2 * l2 + 2.0 * l2 * l2 * t2)
        + &theta * theta.transpose() * (3.0 * l2 * l2);
    let sl = &s_inv * middle * &s_inv;
    let m = &s_inv * v_matrix(spec, &s, &theta) * &s_inv;
    let out = match method {
        Method::Sl => sl,
        Method::Drcl => sl - m * (2.0 - 1.0 / d),
        Method::Sdrcl => sl - m * d,
        other => {
            return Err(Error::param("method", format!("no closed form for `{other}` (sl, drcl or sdrcl)")));
        }
    };
    let out = (&out + out.transpose()) * 0.5;
    Ok(to_rows(&out))
}
