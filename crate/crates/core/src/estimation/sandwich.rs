use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::estimator::{objective_for, CorrectedObjective, EstimationData, Method};
use super::optim::Objective;
use crate::losses::Loss;
use crate::{Error, Result};

/// Largest condition number of `V̂` accepted for inference.
pub const MAX_CONDITION: f64 = 1e10;

/// The pieces of the sandwich `V̂⁻¹ Â V̂⁻¹ / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichParts {
    /// Mean outer product of per-row corrected subgradients.
    pub a_hat: DMatrix<f64>,
    /// Symmetrised finite-difference Jacobian of the mean subgradient.
    pub v_hat: DMatrix<f64>,
    pub n: usize,
}

pub(crate) fn parts_with<L: Loss + ?Sized>(obj: &CorrectedObjective<'_, L>, theta: &[f64]) -> Result<SandwichParts> {
    let p = obj.p;
    let n = obj.n;
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut g = vec![0.0; p];
    for i in 0..n {
        let (x1, x2, pb) = obj.row(i);
        g.iter_mut().for_each(|v| *v = 0.0);
        obj.correction.add_subgrad(obj.loss, x1, x2, pb, theta, 1.0, &mut g);
        for r in 0..p {
            for c in r..p {
                a[(r, c)] += g[r] * g[c];
            }
        }
    }
    for r in 0..p {
        for c in r..p {
            let v = a[(r, c)] / n as f64;
            a[(r, c)] = v;
            a[(c, r)] = v;
        }
    }
    let tn = libm::sqrt(theta.iter().map(|t| t * t).sum::<f64>());
    let h = libm::pow(n as f64, -0.2) * (1.0 + tn);
    let mut v = DMatrix::<f64>::zeros(p, p);
    let (mut gp, mut gm) = (vec![0.0; p], vec![0.0; p]);
    let mut t = theta.to_vec();
    for k in 0..p {
        t[k] = theta[k] + h;
        obj.value_grad(&t, &mut gp);
        t[k] = theta[k] - h;
        obj.value_grad(&t, &mut gm);
        t[k] = theta[k];
        for r in 0..p {
            v[(r, k)] = (gp[r] - gm[r]) / (2.0 * h);
        }
    }
    let v = (&v + v.transpose()) * 0.5;
    Ok(SandwichParts { a_hat: a, v_hat: v, n })
}

pub(crate) fn sandwich_covariance_with<L: Loss + ?Sized>(
    obj: &CorrectedObjective<'_, L>,
    theta: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let parts = parts_with(obj, theta)?;
    let p = parts.v_hat.nrows();
    let eig = parts.v_hat.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if !(hi.is_finite()) || lo == 0.0 || hi / lo > MAX_CONDITION {
        return Err(Error::Inference(format!(
            "the estimated curvature matrix is singular or ill-conditioned (condition number {:.3e}); a larger sample is needed",
            hi / lo
        )));
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let v_inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let cov = &v_inv * &parts.a_hat * &v_inv / parts.n as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok((0..p).map(|r| (0..p).map(|c| cov[(r, c)]).collect()).collect())
}

/// `Â` and `V̂` for `method` at `theta`.
pub fn sandwich_parts<L: Loss + ?Sized>(
    loss: &L,
    method: Method,
    data: &EstimationData,
    theta: &[f64],
    strict_sl: bool,
) -> Result<SandwichParts> {
    let obj = objective_for(loss, method, data, strict_sl)?;
    check_len(theta, obj.p)?;
    parts_with(&obj, theta)
}

/// `V̂⁻¹ Â V̂⁻¹ / n`, with `Â` the mean outer product of the per-row
/// corrected subgradients at `theta` and `V̂` the central-difference
/// Jacobian of the mean subgradient (step `n^{-1/5}(1 + ‖θ‖)`).
pub fn sandwich_covariance<L: Loss + ?Sized>(
    loss: &L,
    method: Method,
    data: &EstimationData,
    theta: &[f64],
    strict_sl: bool,
) -> Result<Vec<Vec<f64>>> {
    let obj = objective_for(loss, method, data, strict_sl)?;
    check_len(theta, obj.p)?;
    sandwich_covariance_with(&obj, theta)
}

fn check_len(theta: &[f64], p: usize) -> Result<()> {
    if theta.len() != p {
        return Err(Error::param("theta", format!("length {} but the loss has {p} parameters", theta.len())));
    }
    Ok(())
}
