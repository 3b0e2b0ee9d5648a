//! Monte Carlo trade-off curves from the Neyman-Pearson test.
//!
//! Draws from `P = SL_d(I)` and `Q = c e₁ + SL_d(I)` are scored by the log
//! likelihood ratio `log f(s - c e₁) - log f(s)`; thresholding that score
//! at every observed value traces the ROC, and its lower convex hull is the
//! trade-off curve of the randomized most powerful tests.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::curve::{alpha_grid, TradeoffCurve, GRID_POINTS};
use crate::distributions::{draw_sl, sl_log_density_r2};
use crate::{Error, Result, RngStream};

/// Draws per independently seeded chunk.
pub const SIM_CHUNK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Null,
    Alternative,
}

fn check_inputs(d: usize, c: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("c", format!("must be positive and finite, got {c}")));
    }
    Ok(())
}

/// Log-likelihood-ratio statistics for draws `[start, start+len)` of one
/// hypothesis. Chunk `k` of the null uses sub-stream `2k`, of the
/// alternative `2k + 1`, so chunks are independent of evaluation order.
pub fn lr_statistics_chunk(
    d: usize,
    c: f64,
    hypothesis: Hypothesis,
    chunk: u64,
    len: usize,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    check_inputs(d, c)?;
    let sub = match hypothesis {
        Hypothesis::Null => rng.substream(2 * chunk),
        Hypothesis::Alternative => rng.substream(2 * chunk + 1),
    };
    let mut r = sub.rng();
    let mut s = vec![0.0; d];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        draw_sl(&mut r, 1.0, &mut s);
        if hypothesis == Hypothesis::Alternative {
            s[0] += c;
        }
        let r2: f64 = s.iter().map(|v| v * v).sum();
        let r2_shift = (r2 - 2.0 * c * s[0] + c * c).max(0.0);
        let l = sl_log_density_r2(d, r2_shift, 1.0)? - sl_log_density_r2(d, r2, 1.0)?;
        out.push(l);
    }
    Ok(out)
}

/// Number of chunks and the length of each for `n` draws.
pub fn chunk_plan(n: usize) -> impl Iterator<Item = (u64, usize)> {
    let chunks = n.div_ceil(SIM_CHUNK);
    (0..chunks).map(move |k| (k as u64, SIM_CHUNK.min(n - k * SIM_CHUNK)))
}

/// Empirical trade-off `T_{d,c}` from `n_sim` draws under each hypothesis,
/// on the 1001-point α grid with per-point standard errors.
pub fn empirical_tradeoff(d: usize, c: f64, n_sim: usize, rng: &RngStream) -> Result<TradeoffCurve> {
    check_inputs(d, c)?;
    if n_sim < 10_000 {
        return Err(Error::param("n_sim", format!("need at least 10^4 simulations, got {n_sim}")));
    }
    let mut null = Vec::with_capacity(n_sim);
    let mut alt = Vec::with_capacity(n_sim);
    for (k, len) in chunk_plan(n_sim) {
        null.extend(lr_statistics_chunk(d, c, Hypothesis::Null, k, len, rng)?);
        alt.extend(lr_statistics_chunk(d, c, Hypothesis::Alternative, k, len, rng)?);
    }
    let mut curve = roc_from_statistics(&mut null, &mut alt, &alpha_grid(GRID_POINTS))?;
    curve.label = format!("empirical d={d} c={c} n_sim={n_sim}");
    Ok(curve)
}

/// Trade-off curve of the likelihood-ratio test from the scores of the null
/// and alternative samples (the slices are sorted in place).
///
/// Scores within a relative 1e-9 of each other are treated as tied. The
/// ROC's lower convex hull is interpolated onto `alphas`. The standard
/// error at α combines the binomial error of β with the threshold error,
/// `√(β(1-β)/n_Q + s² α(1-α)/n_P)`, `s` being the steeper hull slope next
/// to α. On a vertical hull piece at α = 0 the error is the height `1 - β`
/// of that piece.
pub fn roc_from_statistics(null: &mut [f64], alt: &mut [f64], alphas: &[f64]) -> Result<TradeoffCurve> {
    if null.is_empty() || alt.is_empty() {
        return Err(Error::param("n_sim", "no statistics"));
    }
    if null.iter().chain(alt.iter()).any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN likelihood ratio".into()));
    }
    let desc = |a: &f64, b: &f64| b.total_cmp(a);
    null.sort_unstable_by(desc);
    alt.sort_unstable_by(desc);
    let (np, nq) = (null.len() as f64, alt.len() as f64);

    // ROC points, rejecting for scores ≥ threshold, from strict to lax.
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    let (mut i, mut j) = (0usize, 0usize);
    while i < null.len() || j < alt.len() {
        let t = match (null.get(i), alt.get(j)) {
            (Some(&a), Some(&b)) => a.max(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        let floor = t - 1e-9 * (1.0 + t.abs());
        while i < null.len() && null[i] >= floor {
            i += 1;
        }
        while j < alt.len() && alt[j] >= floor {
            j += 1;
        }
        pts.push((i as f64 / np, 1.0 - j as f64 / nq));
    }

    let hull = lower_hull(&pts);
    let slopes: Vec<f64> = hull
        .windows(2)
        .map(|w| {
            let dx = w[1].0 - w[0].0;
            if dx > 0.0 {
                (w[0].1 - w[1].1) / dx
            } else {
                f64::INFINITY
            }
        })
        .collect();

    let mut betas = Vec::with_capacity(alphas.len());
    let mut se = Vec::with_capacity(alphas.len());
    for &a in alphas {
        // Last hull vertex with x ≤ a.
        let k = hull.partition_point(|p| p.0 <= a).saturating_sub(1);
        let b = if k + 1 < hull.len() {
            let (x0, y0) = hull[k];
            let (x1, y1) = hull[k + 1];
            if x1 > x0 {
                y0 + (a - x0) / (x1 - x0) * (y1 - y0)
            } else {
                y1
            }
        } else {
            hull[k].1
        };
        let b = b.clamp(0.0, 1.0);
        let s = if a >= 1.0 {
            None
        } else {
            let here = slopes.get(k).copied().unwrap_or(0.0);
            let before = if k > 0 { slopes[k - 1] } else { 0.0 };
            Some(here.max(before))
        };
        let e = match s {
            None => 0.0,
            Some(s) if s.is_infinite() => 1.0 - b,
            Some(s) => libm::sqrt(b * (1.0 - b) / nq + s * s * a * (1.0 - a) / np),
        };
        betas.push(b);
        se.push(e);
    }
    let mut curve = TradeoffCurve::new(alphas.to_vec(), betas, "empirical")?;
    curve.stderr = Some(se);
    Ok(curve)
}

/// Lower convex hull of points sorted by x (monotone chain). Among points
/// sharing an x only the lowest survives, except at the left end where the
/// vertical drop from the start point is kept.
fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(64);
    for &p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}
