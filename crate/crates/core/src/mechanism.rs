//! The ZIL release and the doubly randomized (DRDP) release.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::distributions::{draw_sl, draw_zil, NoiseParams, CHUNK_ROWS};
use crate::tradeoff::{alpha_grid, beta_c_delta_curve, delta_profile_zil, TradeoffCurve};
use crate::{Error, Result, RngStream, RowMatrix, GENERATOR};

/// Per-attribute support bounds and the mask of privatized attributes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupportBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub private_mask: Vec<bool>,
}

impl SupportBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, private_mask: Vec<bool>) -> Result<Self> {
        let b = SupportBox {
            lower,
            upper,
            private_mask,
        };
        b.validate()?;
        Ok(b)
    }

    /// `[lower, upper]^d` with every attribute private.
    pub fn cube(lower: f64, upper: f64, d: usize) -> Result<Self> {
        SupportBox::new(vec![lower; d], vec![upper; d], vec![true; d])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.lower.len();
        if d == 0 || self.upper.len() != d || self.private_mask.len() != d {
            return Err(Error::param("support", "lower, upper and private_mask must have the same non-zero length"));
        }
        for j in 0..d {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || !(lo < hi) {
                return Err(Error::param("support", format!("attribute {j} has empty range [{lo}, {hi}]")));
            }
            if self.private_mask[j] && !(hi - lo).is_finite() {
                return Err(Error::param("support", format!("private attribute {j} needs a bounded range")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn masked_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.private_mask[j]).collect()
    }

    pub fn public_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !self.private_mask[j]).collect()
    }
}

fn masked_widths(support: &SupportBox) -> Result<Vec<f64>> {
    support.validate()?;
    let w: Vec<f64> = support
        .masked_columns()
        .into_iter()
        .map(|j| support.upper[j] - support.lower[j])
        .collect();
    if w.is_empty() {
        return Err(Error::param("private_mask", "no attribute is marked private"));
    }
    Ok(w)
}

/// `max_j diam(X_j)` over the private attributes.
pub fn diam_attribute(support: &SupportBox) -> Result<f64> {
    Ok(masked_widths(support)?.into_iter().fold(0.0, f64::max))
}

/// Euclidean diameter of the private sub-box.
pub fn diam_individual(support: &SupportBox) -> Result<f64> {
    Ok(libm::sqrt(masked_widths(support)?.iter().map(|w| w * w).sum()))
}

/// A data matrix checked against its declared support.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub values: RowMatrix,
    pub column_names: Vec<String>,
    pub support: SupportBox,
}

impl Dataset {
    pub fn new(values: RowMatrix, column_names: Vec<String>, support: SupportBox) -> Result<Self> {
        support.validate()?;
        let d = support.dim();
        if values.ncols() != d {
            return Err(Error::Data(format!("data has {} columns but the support has {d}", values.ncols())));
        }
        if column_names.len() != d {
            return Err(Error::Data(format!("{} column names for {d} columns", column_names.len())));
        }
        if values.nrows() == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        for (i, row) in values.rows_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::Data(format!("row {i}, column `{}`: value {v} is not finite", column_names[j])));
                }
                if support.private_mask[j] && !(support.lower[j] <= v && v <= support.upper[j]) {
                    return Err(Error::Data(format!(
                        "row {i}, column `{}`: {v} lies outside the support [{}, {}]",
                        column_names[j], support.lower[j], support.upper[j]
                    )));
                }
            }
        }
        Ok(Dataset {
            values,
            column_names,
            support,
        })
    }

    /// Columns named `x1, x2, …`.
    pub fn with_default_names(values: RowMatrix, support: SupportBox) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("x{j}")).collect();
        Dataset::new(values, names, support)
    }
}

/// Output of [`drdp_release`]: two aligned noisy copies plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseBundle {
    pub x1: RowMatrix,
    pub x2: RowMatrix,
    pub column_names: Vec<String>,
    pub params: NoiseParams,
    pub support: SupportBox,
    pub seed: u64,
    pub stream_id: u64,
    pub generator: String,
    pub created_at: Option<String>,
}

/// Adds `noise` (one call per row, writing the masked coordinates) chunk by
/// chunk on sub-streams of `rng`.
fn perturb<F>(source: &RowMatrix, mask: &[usize], rng: &RngStream, mut noise: F) -> RowMatrix
where
    F: FnMut(&mut rand_chacha::ChaCha8Rng, &mut [f64]),
{
    let mut out = source.clone();
    let mut z = vec![0.0; mask.len()];
    let n = source.nrows();
    let mut start = 0;
    let mut chunk = 0u64;
    while start < n {
        let end = (start + CHUNK_ROWS).min(n);
        let mut r = rng.substream(chunk).rng();
        for i in start..end {
            noise(&mut r, &mut z);
            let row = out.row_mut(i);
            for (&j, &zj) in mask.iter().zip(&z) {
                row[j] += zj;
            }
        }
        start = end;
        chunk += 1;
    }
    out
}

/// `X_i + Z_i` with `Z_i ~ ZIL(δ, λ² I)` on the private attributes; one zero
/// event per row, shared by all of its private attributes.
pub fn zil_release(data: &Dataset, params: &NoiseParams, rng: &RngStream) -> Result<RowMatrix> {
    params.validate()?;
    let mask = data.support.masked_columns();
    if mask.is_empty() {
        return Err(Error::param("private_mask", "no attribute is marked private"));
    }
    Ok(perturb(&data.values, &mask, rng, |r, z| {
        draw_zil(r, params, z);
    }))
}

/// DRDP release: `x1` from [`zil_release`] (sub-stream 0), then
/// `x2 = x1 + S` with `S ~ SL(δλ² I)` on the private attributes (sub-stream 1).
pub fn drdp_release(data: &Dataset, params: &NoiseParams, rng: &RngStream) -> Result<ReleaseBundle> {
    let x1 = zil_release(data, params, &rng.substream(0))?;
    let mask = data.support.masked_columns();
    let var = params.zero_mass * params.scale * params.scale;
    let x2 = perturb(&x1, &mask, &rng.substream(1), |r, z| draw_sl(r, var, z));
    Ok(ReleaseBundle {
        x1,
        x2,
        column_names: data.column_names.clone(),
        params: *params,
        support: data.support.clone(),
        seed: rng.seed,
        stream_id: rng.stream_id,
        generator: GENERATOR.into(),
        created_at: None,
    })
}

/// Privacy guarantees of a ZIL release.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrivacyReport {
    pub c_attribute: f64,
    pub c_individual: f64,
    pub zero_mass: f64,
    pub lambda: f64,
    /// `β_{c_A,δ}`: attribute-level guarantee.
    pub adp_curve: TradeoffCurve,
    /// `β_{c_I,δ}`: record-level guarantee.
    pub dp_curve: TradeoffCurve,
    pub profile: Vec<ProfilePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfilePoint {
    pub epsilon: f64,
    pub delta_dp_attribute: f64,
    pub delta_dp_individual: f64,
}

/// ε values tabulated by [`privacy_report`].
pub const REPORT_EPSILONS: [f64; 10] = [0.1, 0.25, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0];

pub fn privacy_report(support: &SupportBox, params: &NoiseParams) -> Result<PrivacyReport> {
    params.validate()?;
    let c_attribute = diam_attribute(support)? / params.scale;
    let c_individual = diam_individual(support)? / params.scale;
    let grid = alpha_grid(101);
    let mut adp_curve = beta_c_delta_curve(c_attribute, params.zero_mass, grid.clone())?;
    adp_curve.label = format!("adp c={c_attribute}");
    let mut dp_curve = beta_c_delta_curve(c_individual, params.zero_mass, grid)?;
    dp_curve.label = format!("dp c={c_individual}");
    let profile = REPORT_EPSILONS
        .iter()
        .map(|&epsilon| {
            Ok(ProfilePoint {
                epsilon,
                delta_dp_attribute: delta_profile_zil(c_attribute, epsilon, params.zero_mass)?,
                delta_dp_individual: delta_profile_zil(c_individual, epsilon, params.zero_mass)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PrivacyReport {
        c_attribute,
        c_individual,
        zero_mass: params.zero_mass,
        lambda: params.scale,
        adp_curve,
        dp_curve,
        profile,
    })
}
