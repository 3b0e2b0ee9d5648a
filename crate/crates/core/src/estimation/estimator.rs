use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use super::optim::{minimize, Diagnostics, Objective, OptimMethod, OptimOptions};
use super::sandwich::sandwich_covariance_with;
use crate::distributions::NoiseParams;
use crate::losses::{Correction, Loss};
use crate::mechanism::ReleaseBundle;
use crate::{Error, Result, RowMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    /// ℓ on the original data.
    Oracle,
    /// ℓ on the ZIL release `x1`, uncorrected.
    Naive,
    /// Laplacian-corrected ℓ on `x2`.
    Sl,
    Drcl,
    Sdrcl,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Oracle, Method::Naive, Method::Sl, Method::Drcl, Method::Sdrcl];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Naive => "naive",
            Method::Sl => "sl",
            Method::Drcl => "drcl",
            Method::Sdrcl => "sdrcl",
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::param("method", format!("unknown method `{s}` (oracle, naive, sl, drcl, sdrcl)")))
    }
}

/// Rows split into private features and public columns, for whichever of
/// the original / `x1` / `x2` copies are available.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationData {
    n: usize,
    n_features: usize,
    n_publics: usize,
    original: Option<Vec<f64>>,
    x1: Option<Vec<f64>>,
    x2: Option<Vec<f64>>,
    publics: Vec<f64>,
    noise: Option<NoiseParams>,
}

fn split(m: &RowMatrix, mask: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::new();
    let mut p = Vec::new();
    for row in m.rows_iter() {
        for (v, &private) in row.iter().zip(mask) {
            if private {
                f.push(*v);
            } else {
                p.push(*v);
            }
        }
    }
    (f, p)
}

impl EstimationData {
    /// Any of the three copies may be missing; the public columns are taken
    /// from the first one present.
    pub fn new(
        original: Option<&RowMatrix>,
        x1: Option<&RowMatrix>,
        x2: Option<&RowMatrix>,
        private_mask: &[bool],
        noise: Option<NoiseParams>,
    ) -> Result<Self> {
        let present: Vec<&RowMatrix> = [original, x1, x2].into_iter().flatten().collect();
        let first = present.first().ok_or_else(|| Error::Data("no data supplied".into()))?;
        let (n, d) = (first.nrows(), first.ncols());
        if n == 0 {
            return Err(Error::Data("no rows".into()));
        }
        if private_mask.len() != d {
            return Err(Error::Data(format!("mask has {} entries for {d} columns", private_mask.len())));
        }
        if present.iter().any(|m| m.nrows() != n || m.ncols() != d) {
            return Err(Error::Data("original, x1 and x2 must have the same shape".into()));
        }
        if present.iter().any(|m| m.as_slice().iter().any(|v| !v.is_finite())) {
            return Err(Error::Data("non-finite value in the data".into()));
        }
        let n_features = private_mask.iter().filter(|&&b| b).count();
        let (_, publics) = split(first, private_mask);
        let feats = |m: Option<&RowMatrix>| m.map(|m| split(m, private_mask).0);
        if let Some(p) = noise {
            p.validate()?;
        }
        Ok(EstimationData {
            n,
            n_features,
            n_publics: d - n_features,
            original: feats(original),
            x1: feats(x1),
            x2: feats(x2),
            publics,
            noise,
        })
    }

    pub fn from_bundle(bundle: &ReleaseBundle, original: Option<&RowMatrix>) -> Result<Self> {
        EstimationData::new(
            original,
            Some(&bundle.x1),
            Some(&bundle.x2),
            &bundle.support.private_mask,
            Some(bundle.params),
        )
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_publics(&self) -> usize {
        self.n_publics
    }

    pub fn noise(&self) -> Option<NoiseParams> {
        self.noise
    }

    /// Feature buffers `(first, second)` as read by `correction`.
    pub(crate) fn buffers(&self, method: Method) -> Result<(&[f64], &[f64])> {
        fn need<'a>(b: &'a Option<Vec<f64>>, method: Method, what: &str) -> Result<&'a [f64]> {
            b.as_deref()
                .ok_or_else(|| Error::Data(format!("method `{method}` needs the {what} data")))
        }
        Ok(match method {
            Method::Oracle => (need(&self.original, method, "original")?, &[]),
            Method::Naive => (need(&self.x1, method, "x1 (ZIL release)")?, &[]),
            Method::Sl => (&[], need(&self.x2, method, "x2 (doubly randomized)")?),
            Method::Drcl | Method::Sdrcl => (need(&self.x1, method, "x1 (ZIL release)")?, need(&self.x2, method, "x2 (doubly randomized)")?),
        })
    }

    pub(crate) fn publics(&self) -> &[f64] {
        &self.publics
    }
}

/// Mean corrected loss over the rows.
pub(crate) struct CorrectedObjective<'a, L: Loss + ?Sized> {
    pub loss: &'a L,
    pub correction: Correction,
    pub f1: &'a [f64],
    pub f2: &'a [f64],
    pub publics: &'a [f64],
    pub n: usize,
    pub nf: usize,
    pub np: usize,
    pub p: usize,
}

impl<L: Loss + ?Sized> CorrectedObjective<'_, L> {
    #[inline]
    pub fn row(&self, i: usize) -> (&[f64], &[f64], &[f64]) {
        let nf = self.nf;
        let x1 = if self.f1.is_empty() { &[][..] } else { &self.f1[i * nf..(i + 1) * nf] };
        let x2 = if self.f2.is_empty() { &[][..] } else { &self.f2[i * nf..(i + 1) * nf] };
        (x1, x2, &self.publics[i * self.np..(i + 1) * self.np])
    }
}

impl<L: Loss + ?Sized> Objective for CorrectedObjective<'_, L> {
    fn dim(&self) -> usize {
        self.p
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let (x1, x2, pb) = self.row(i);
            s += self.correction.value(self.loss, x1, x2, pb, theta);
        }
        s / self.n as f64
    }

    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let w = 1.0 / self.n as f64;
        let mut s = 0.0;
        for i in 0..self.n {
            let (x1, x2, pb) = self.row(i);
            s += self.correction.value(self.loss, x1, x2, pb, theta);
            self.correction.add_subgrad(self.loss, x1, x2, pb, theta, w, grad);
        }
        s * w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub optim: OptimOptions,
    /// Reject SL for losses without an x-Laplacian (otherwise the
    /// correction term is taken as zero).
    pub strict_sl: bool,
    pub covariance: bool,
    /// Start for the oracle and naive fits (zeros by default). Corrected
    /// fits start from the naive estimate.
    pub theta0: Option<Vec<f64>>,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            optim: OptimOptions::default(),
            strict_sl: true,
            covariance: true,
            theta0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub method: Method,
    pub loss: String,
    pub theta_hat: Vec<f64>,
    /// Sandwich estimate of `Cov(θ̂)`, row by row.
    pub covariance: Option<Vec<Vec<f64>>>,
    pub std_errors: Option<Vec<f64>>,
    pub objective: f64,
    pub diagnostics: Diagnostics,
}

pub(crate) fn correction_for(method: Method, data: &EstimationData, strict_sl: bool) -> Result<Correction> {
    let noise = || {
        data.noise
            .ok_or_else(|| Error::Data(format!("method `{method}` needs the noise parameters (zero_mass, lambda)")))
    };
    Ok(match method {
        Method::Oracle | Method::Naive => Correction::Plain,
        Method::Sl => Correction::Sl {
            lambda: noise()?.scale,
            strict: strict_sl,
        },
        Method::Drcl => Correction::Drcl {
            zero_mass: noise()?.zero_mass,
        },
        Method::Sdrcl => {
            let p = noise()?;
            Correction::Sdrcl {
                zero_mass: p.zero_mass,
                lambda: p.scale,
            }
        }
    })
}

pub(crate) fn objective_for<'a, L: Loss + ?Sized>(
    loss: &'a L,
    method: Method,
    data: &'a EstimationData,
    strict_sl: bool,
) -> Result<CorrectedObjective<'a, L>> {
    let correction = correction_for(method, data, strict_sl)?;
    correction.validate(loss)?;
    let p = loss.num_params(data.n_features, data.n_publics)?;
    let (f1, f2) = data.buffers(method)?;
    Ok(CorrectedObjective {
        loss,
        correction,
        f1,
        f2,
        publics: data.publics(),
        n: data.n,
        nf: data.n_features,
        np: data.n_publics,
        p,
    })
}

/// Fits `method` with `loss` and attaches sandwich standard errors.
pub fn estimate<L: Loss + ?Sized>(
    method: Method,
    data: &EstimationData,
    loss: &L,
    options: &EstimateOptions,
) -> Result<EstimateReport> {
    let obj = objective_for(loss, method, data, options.strict_sl)?;
    let p = obj.p;
    let start = match &options.theta0 {
        Some(t) if t.len() == p => t.clone(),
        Some(t) => {
            return Err(Error::param("theta0", format!("length {} but the loss has {p} parameters", t.len())));
        }
        None => vec![0.0; p],
    };
    let min = if obj.correction.possibly_nonconvex() {
        let naive_obj = objective_for(loss, Method::Naive, data, options.strict_sl)?;
        let local = OptimOptions {
            method: OptimMethod::SubgradientAdaptive,
            ..options.optim.clone()
        };
        let warm = minimize(&naive_obj, &start, &local)?;
        let multi = OptimOptions {
            method: OptimMethod::Multistart,
            ..options.optim.clone()
        };
        let mut m = minimize(&obj, &warm.theta, &multi)?;
        m.diagnostics.evaluations += warm.diagnostics.evaluations;
        m
    } else {
        minimize(&obj, &start, &options.optim)?
    };
    let (covariance, std_errors) = if options.covariance {
        let cov = sandwich_covariance_with(&obj, &min.theta)?;
        let se = (0..p).map(|k| libm::sqrt(cov[k][k].max(0.0))).collect();
        (Some(cov), Some(se))
    } else {
        (None, None)
    };
    Ok(EstimateReport {
        method,
        loss: loss.name(),
        theta_hat: min.theta,
        covariance,
        std_errors,
        objective: min.value,
        diagnostics: min.diagnostics,
    })
}
