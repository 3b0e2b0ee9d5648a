use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Points in the default α grid `{0, 0.001, …, 1}`.
pub const GRID_POINTS: usize = 1001;

/// Evenly spaced grid on `[0, 1]` with both endpoints.
pub fn alpha_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "a grid needs both endpoints");
    let m = (points - 1) as f64;
    (0..points).map(|i| i as f64 / m).collect()
}

/// A sampled trade-off function `α ↦ β`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TradeoffCurve {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub label: String,
    /// Per-point Monte Carlo standard errors for simulated curves.
    pub stderr: Option<Vec<f64>>,
}

impl TradeoffCurve {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if alphas.len() != betas.len() || alphas.len() < 2 {
            return Err(Error::param("betas", "alpha and beta grids must align (and have ≥ 2 points)"));
        }
        if alphas.windows(2).any(|w| !(w[0] < w[1])) || alphas[0] < 0.0 || alphas[alphas.len() - 1] > 1.0 {
            return Err(Error::param("alphas", "must be strictly increasing inside [0, 1]"));
        }
        Ok(TradeoffCurve {
            alphas,
            betas,
            label: label.into(),
            stderr: None,
        })
    }

    pub fn from_fn<F: FnMut(f64) -> Result<f64>>(
        alphas: Vec<f64>,
        label: impl Into<String>,
        mut f: F,
    ) -> Result<Self> {
        let betas = alphas.iter().map(|&a| f(a)).collect::<Result<Vec<_>>>()?;
        TradeoffCurve::new(alphas, betas, label)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Linear interpolation; α outside the grid is clamped to its ends.
    pub fn value_at(&self, alpha: f64) -> f64 {
        let a = &self.alphas;
        if alpha <= a[0] {
            return self.betas[0];
        }
        let last = a.len() - 1;
        if alpha >= a[last] {
            return self.betas[last];
        }
        let k = a.partition_point(|&x| x <= alpha) - 1;
        let t = (alpha - a[k]) / (a[k + 1] - a[k]);
        self.betas[k] + t * (self.betas[k + 1] - self.betas[k])
    }

    pub fn sup_distance(&self, other: &TradeoffCurve) -> f64 {
        self.alphas
            .iter()
            .zip(&self.betas)
            .map(|(&a, &b)| (b - other.value_at(a)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest increase between consecutive points (0 for a monotone curve).
    pub fn monotonicity_violation(&self) -> f64 {
        self.betas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Largest excess of β over `1 - α`.
    pub fn identity_violation(&self) -> f64 {
        self.alphas
            .iter()
            .zip(&self.betas)
            .map(|(&a, &b)| b - (1.0 - a))
            .fold(0.0, f64::max)
    }

    /// Largest negative normalised second difference; 0 for a convex curve.
    pub fn convexity_violation(&self) -> f64 {
        let (a, b) = (&self.alphas, &self.betas);
        (1..a.len() - 1)
            .map(|i| {
                let left = (b[i] - b[i - 1]) / (a[i] - a[i - 1]);
                let right = (b[i + 1] - b[i]) / (a[i + 1] - a[i]);
                (left - right) * 0.5 * (a[i + 1] - a[i - 1])
            })
            .fold(0.0, f64::max)
    }
}

/// Differential-privacy budget `(ε, δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta_dp: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta_dp: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be finite and ≥ 0, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta_dp) {
            return Err(Error::param("delta_dp", format!("must lie in [0, 1), got {delta_dp}")));
        }
        Ok(PrivacyBudget { epsilon, delta_dp })
    }
}

/// `(1-δ) T(α/(1-δ))` for `α ≤ 1-δ`, else 0, resampled on the curve's grid.
pub fn tradeoff_shrink(curve: &TradeoffCurve, zero_mass: f64) -> Result<TradeoffCurve> {
    if !(zero_mass > 0.0 && zero_mass < 1.0) {
        return Err(Error::param("zero_mass", format!("must lie in (0, 1), got {zero_mass}")));
    }
    let keep = 1.0 - zero_mass;
    let betas = curve
        .alphas
        .iter()
        .map(|&a| if a > keep { 0.0 } else { keep * curve.value_at((a / keep).min(1.0)) })
        .collect();
    let stderr = curve.stderr.as_ref().map(|se| {
        let se_curve = TradeoffCurve {
            alphas: curve.alphas.clone(),
            betas: se.clone(),
            label: String::new(),
            stderr: None,
        };
        curve
            .alphas
            .iter()
            .map(|&a| if a > keep { 0.0 } else { keep * se_curve.value_at((a / keep).min(1.0)) })
            .collect()
    });
    Ok(TradeoffCurve {
        alphas: curve.alphas.clone(),
        betas,
        label: format!("{}|zero_mass={zero_mass}", curve.label),
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn grid_has_endpoints() {
        let g = alpha_grid(GRID_POINTS);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1000], 1.0);
        assert!((g[200] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn interpolation_and_checks() {
        let c = TradeoffCurve::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.2, 0.0], "t").unwrap();
        assert!((c.value_at(0.25) - 0.6).abs() < 1e-15);
        assert_eq!(c.monotonicity_violation(), 0.0);
        assert_eq!(c.identity_violation(), 0.0);
        assert_eq!(c.convexity_violation(), 0.0);
        let bad = TradeoffCurve::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.6, 0.0], "t").unwrap();
        assert!(bad.identity_violation() > 0.09 && bad.convexity_violation() > 0.0);
        assert!(TradeoffCurve::new(vec![0.5, 0.5], vec![1.0, 0.0], "t").is_err());
    }

    #[test]
    fn shrink_basics() {
        let id = TradeoffCurve::from_fn(alpha_grid(101), "id", |a| Ok(1.0 - a)).unwrap();
        let s = tradeoff_shrink(&id, 0.5).unwrap();
        assert!((s.value_at(0.25) - 0.5 * 0.5).abs() < 1e-12);
        assert!(s.alphas.iter().zip(&s.betas).all(|(&a, &b)| a <= 0.5 || b == 0.0));
        assert!(tradeoff_shrink(&id, 0.0).is_err());
    }

    #[test]
    fn budget_validation() {
        assert!(PrivacyBudget::new(-0.1, 0.0).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(0.8, 0.17).is_ok());
    }
}
