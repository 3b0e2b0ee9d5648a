//! Minimisers for possibly nonsmooth, possibly nonconvex objectives.
//!
//! The local workhorse is BFGS with a weak Wolfe line search driven by
//! subgradients, which behaves well on piecewise-smooth objectives (it
//! homes in on kinks instead of cycling). Multistart wraps it with
//! perturbed starting points and a final Nelder-Mead polish.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result, RngStream};

/// An objective with a (sub)gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, theta: &[f64]) -> f64;
    /// Returns the value and overwrites `grad`.
    fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OptimMethod {
    /// BFGS with a weak Wolfe line search on subgradients.
    SubgradientAdaptive,
    NelderMead,
    /// Several BFGS runs from perturbed starts, best kept, then polished.
    Multistart,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimOptions {
    pub method: OptimMethod,
    pub max_iters: usize,
    pub step_tol: f64,
    pub obj_tol: f64,
    /// Total number of starts for multistart (the first is `theta0`).
    pub restarts: usize,
    /// Perturbation half-width as a multiple of `max(|theta0|_∞, 0.5)`.
    pub spread: f64,
    pub seed: u64,
    /// Optional box `[lower, upper]`; iterates are projected onto it.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
    /// Nelder-Mead polish of the best point when `dim ≤ 10`.
    pub polish: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            method: OptimMethod::SubgradientAdaptive,
            max_iters: 500,
            step_tol: 1e-10,
            obj_tol: 1e-12,
            restarts: 5,
            spread: 2.0,
            seed: 0,
            bounds: None,
            polish: true,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.step_tol > 0.0) || !(self.obj_tol > 0.0) {
            return Err(Error::param("tolerance", "step and objective tolerances must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::param("restarts", "need at least one start"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        if let Some((lo, hi)) = &self.bounds {
            if lo.len() != dim || hi.len() != dim || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
                return Err(Error::param("bounds", "box must match the dimension and have lower ≤ upper"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Diagnostics {
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts_used: usize,
    /// Index of the start that produced the returned point.
    pub best_start: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub theta: Vec<f64>,
    pub value: f64,
    pub diagnostics: Diagnostics,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(theta: &mut [f64], bounds: &Option<(Vec<f64>, Vec<f64>)>) {
    if let Some((lo, hi)) = bounds {
        for ((t, &l), &h) in theta.iter_mut().zip(lo).zip(hi) {
            *t = t.clamp(l, h);
        }
    }
}

/// Minimises `obj` from `theta0` according to `options`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, theta0: &[f64], options: &OptimOptions) -> Result<Minimum> {
    let p = obj.dim();
    if theta0.len() != p {
        return Err(Error::param("theta0", format!("length {} but the objective has dimension {p}", theta0.len())));
    }
    options.validate(p)?;
    let mut start = theta0.to_vec();
    project(&mut start, &options.bounds);
    let f0 = obj.value(&start);
    if !f0.is_finite() {
        return Err(Error::NonFinite { theta: start });
    }
    let mut best = match options.method {
        OptimMethod::SubgradientAdaptive => bfgs(obj, &start, options),
        OptimMethod::NelderMead => nelder_mead(obj, &start, options, 0.1, usize::MAX),
        OptimMethod::Multistart => multistart(obj, &start, options)?,
    };
    if options.polish && p <= 10 && options.method != OptimMethod::NelderMead {
        let polished = nelder_mead(obj, &best.theta, options, 1e-3, 40 * (p + 1));
        best.diagnostics.evaluations += polished.diagnostics.evaluations;
        if polished.value < best.value {
            best.theta = polished.theta;
            best.value = polished.value;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::NonFinite { theta: best.theta });
    }
    let mut g = vec![0.0; p];
    obj.value_grad(&best.theta, &mut g);
    best.diagnostics.grad_norm = norm(&g);
    Ok(best)
}

fn multistart<O: Objective + ?Sized>(obj: &O, theta0: &[f64], options: &OptimOptions) -> Result<Minimum> {
    let p = theta0.len();
    let scale = theta0.iter().fold(0.5f64, |m, t| m.max(t.abs())) * options.spread;
    let stream = RngStream::new(options.seed, 0x6d75_6c74);
    let mut best: Option<Minimum> = None;
    let mut total = Diagnostics::default();
    for k in 0..options.restarts {
        let mut x = theta0.to_vec();
        if k > 0 {
            let mut r = stream.substream(k as u64).rng();
            for v in x.iter_mut() {
                *v += scale * (2.0 * r.random::<f64>() - 1.0);
            }
            project(&mut x, &options.bounds);
            if !obj.value(&x).is_finite() {
                continue;
            }
        }
        let m = bfgs(obj, &x, options);
        total.iterations += m.diagnostics.iterations;
        total.evaluations += m.diagnostics.evaluations;
        total.restarts_used += 1;
        // Strict improvement only, so the smallest index wins ties.
        let better = match &best {
            None => true,
            Some(b) => m.value < b.value,
        };
        if better {
            total.best_start = k;
            total.converged = m.diagnostics.converged;
            best = Some(m);
        }
    }
    let mut best = best.ok_or_else(|| Error::Numeric("no finite starting point".into()))?;
    debug_assert_eq!(best.theta.len(), p);
    best.diagnostics = total;
    Ok(best)
}

/// BFGS on subgradients with a bisection weak Wolfe line search.
fn bfgs<O: Objective + ?Sized>(obj: &O, theta0: &[f64], options: &OptimOptions) -> Minimum {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    let p = theta0.len();
    let mut x = theta0.to_vec();
    let mut g = vec![0.0; p];
    let mut f = obj.value_grad(&x, &mut g);
    let mut evals = 1;
    let mut h = vec![0.0; p * p];
    let reset = |h: &mut Vec<f64>, s: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..p {
            h[i * p + i] = s;
        }
    };
    reset(&mut h, 1.0);
    let mut first = true;
    let mut converged = false;
    let mut quiet = 0;
    let mut iters = 0;
    let mut d = vec![0.0; p];
    let mut xt = vec![0.0; p];
    let mut gt = vec![0.0; p];
    while iters < options.max_iters {
        iters += 1;
        if norm(&g) == 0.0 {
            converged = true;
            break;
        }
        for i in 0..p {
            d[i] = -(0..p).map(|j| h[i * p + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            reset(&mut h, 1.0);
            first = true;
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&g, &d);
        }
        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut t = if first { (1.0 / norm(&d)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..p {
                xt[i] = x[i] + t * d[i];
            }
            project(&mut xt, &options.bounds);
            let ft = obj.value_grad(&xt, &mut gt);
            evals += 1;
            if !ft.is_finite() || ft > f + C1 * t * slope {
                hi = t;
            } else if dot(&gt, &d) < C2 * slope && options.bounds.is_none() {
                lo = t;
            } else {
                accepted = Some(ft);
                break;
            }
            t = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
            if hi.is_finite() && hi - lo < 1e-15 * (1.0 + lo) {
                break;
            }
        }
        let ft = match accepted {
            Some(v) => v,
            None => {
                // No Wolfe point; keep a plain decrease if the search found one.
                if lo > 0.0 {
                    for i in 0..p {
                        xt[i] = x[i] + lo * d[i];
                    }
                    project(&mut xt, &options.bounds);
                    let v = obj.value_grad(&xt, &mut gt);
                    evals += 1;
                    if v < f {
                        v
                    } else {
                        converged = true;
                        break;
                    }
                } else {
                    converged = true;
                    break;
                }
            }
        };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let step = norm(&s);
        let df = f - ft;
        x.copy_from_slice(&xt);
        g.copy_from_slice(&gt);
        f = ft;
        if sy > 1e-300 {
            if first {
                reset(&mut h, sy / dot(&y, &y));
                first = false;
            }
            // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..p).map(|i| (0..p).map(|j| h[i * p + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..p {
                for j in 0..p {
                    h[i * p + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        if step <= options.step_tol * (1.0 + norm(&x)) {
            converged = true;
            break;
        }
        if df <= options.obj_tol * (1.0 + f.abs()) {
            quiet += 1;
            if quiet >= 3 {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Minimum {
        theta: x,
        value: f,
        diagnostics: Diagnostics {
            iterations: iters,
            evaluations: evals,
            restarts_used: 1,
            best_start: 0,
            grad_norm: norm(&g),
            converged,
        },
    }
}

/// Nelder-Mead with dimension-adaptive coefficients; the initial simplex
/// offsets each coordinate by `scale · max(|θ_i|, 1)`. Stops after
/// `eval_cap` evaluations at the latest.
fn nelder_mead<O: Objective + ?Sized>(
    obj: &O,
    theta0: &[f64],
    options: &OptimOptions,
    scale: f64,
    eval_cap: usize,
) -> Minimum {
    let p = theta0.len();
    let n = p as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / n, 0.75 - 1.0 / (2.0 * n), 1.0 - 1.0 / n);
    let eval = |x: &mut Vec<f64>| -> f64 {
        project(x, &options.bounds);
        let v = obj.value(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let mut start = theta0.to_vec();
    let mut values = vec![eval(&mut start)];
    simplex.push(start);
    for i in 0..p {
        let mut v = theta0.to_vec();
        v[i] += scale * theta0[i].abs().max(1.0);
        values.push(eval(&mut v));
        simplex.push(v);
    }
    let mut evals = p + 1;
    let max_evals = (options.max_iters * (p + 1)).max(200 * (p + 1)).min(eval_cap);
    let mut iters = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=p).collect();
    while evals < max_evals {
        iters += 1;
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let (b, w, sw) = (order[0], order[p], order[p - 1]);
        let spread = values[w] - values[b];
        let diam = simplex
            .iter()
            .map(|v| v.iter().zip(&simplex[b]).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= options.obj_tol * (1.0 + values[b].abs()) && diam <= 1e3 * options.step_tol * (1.0 + norm(&simplex[b])) {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; p];
        for &k in &order[..p] {
            for i in 0..p {
                centroid[i] += simplex[k][i] / n;
            }
        }
        let along = |t: f64| -> Vec<f64> { (0..p).map(|i| centroid[i] + t * (simplex[w][i] - centroid[i])).collect() };
        let mut xr = along(-alpha);
        let fr = eval(&mut xr);
        evals += 1;
        if fr < values[b] {
            let mut xe = along(-alpha * gamma);
            let fe = eval(&mut xe);
            evals += 1;
            if fe < fr {
                simplex[w] = xe;
                values[w] = fe;
            } else {
                simplex[w] = xr;
                values[w] = fr;
            }
            continue;
        }
        if fr < values[sw] {
            simplex[w] = xr;
            values[w] = fr;
            continue;
        }
        let (mut xc, outside) = if fr < values[w] { (along(-alpha * rho), true) } else { (along(rho), false) };
        let fc = eval(&mut xc);
        evals += 1;
        if (outside && fc <= fr) || (!outside && fc < values[w]) {
            simplex[w] = xc;
            values[w] = fc;
            continue;
        }
        let xb = simplex[b].clone();
        for &k in &order[1..] {
            let mut v: Vec<f64> = (0..p).map(|i| xb[i] + sigma * (simplex[k][i] - xb[i])).collect();
            values[k] = eval(&mut v);
            simplex[k] = v;
            evals += 1;
        }
    }
    let b = (0..=p).min_by(|&a, &c| values[a].total_cmp(&values[c]).then(a.cmp(&c))).unwrap_or(0);
    Minimum {
        theta: simplex[b].clone(),
        value: values[b],
        diagnostics: Diagnostics {
            iterations: iters,
            evaluations: evals,
            restarts_used: 1,
            best_start: 0,
            grad_norm: f64::NAN,
            converged,
        },
    }
}
