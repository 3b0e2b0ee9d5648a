//! Replication engine and the table / figure reproductions.
//!
//! Replication `r` of a cell draws everything from
//! `RngStream::new(seed, cell_id).substream(r)`, so results do not depend
//! on thread scheduling; per-replication outputs are reduced in index order.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use zildp_core::distributions::sample_truncated_normal;
use zildp_core::estimation::{estimate, EstimateOptions, EstimationData, Method};
use zildp_core::losses::{BuiltinLoss, Loss};
use zildp_core::mechanism::{drdp_release, Dataset, SupportBox};
use zildp_core::special::logistic;
use zildp_core::tradeoff::{
    alpha_grid, beta_c_delta_curve, chunk_plan, delta_profile_zil, f_eps_delta, lr_statistics_chunk,
    roc_from_statistics, tradeoff_shrink, Hypothesis, PrivacyBudget, TradeoffCurve, GRID_POINTS,
};
use zildp_core::{NoiseParams, RngStream, RowMatrix, GENERATOR};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::io::{write_curves_csv, write_json};

/// Runs `f(r)` for `r in 0..reps` on the rayon pool and returns the results
/// in index order.
pub fn replicate<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..reps).into_par_iter().map(f).collect()
}

/// One RMSE cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub n: usize,
    pub zero_mass: f64,
    pub lambda: f64,
    pub loss: String,
    pub method: String,
    pub parameter: String,
    pub rmse: f64,
    pub mc_se: f64,
    pub replications: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        crate::io::create_parent(path)?;
        let mut w = csv::Writer::from_path(path).map_err(|e| AppError::format(path, e))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| AppError::format(path, e))?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "experiment", "n", "zero_mass", "lambda", "loss", "method", "parameter", "rmse", "mc_se",
                "replications", "failed",
            ])
            .map_err(|e| AppError::format(path, e))?;
        }
        w.flush().map_err(|e| AppError::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e))?;
        let rows = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(|e| AppError::format(path, e))?;
        Ok(ResultTable { rows })
    }

    pub fn find(&self, n: usize, zero_mass: f64, lambda: f64, loss: &str, method: Method, parameter: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| {
            r.n == n
                && r.zero_mass == zero_mass
                && r.lambda == lambda
                && r.loss == loss
                && r.method == method.as_str()
                && r.parameter == parameter
        })
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }
}

/// Average of the per-column RMSEs over `cols`, with its delta-method
/// Monte Carlo standard error. `errors[r][j]` is the error of replication
/// `r` in parameter `j`.
pub fn rmse_summary(errors: &[Vec<f64>], cols: &[usize]) -> (f64, f64) {
    let reps = errors.len();
    if reps == 0 || cols.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let rf = reps as f64;
    let msq: Vec<f64> = cols
        .iter()
        .map(|&j| errors.iter().map(|e| e[j] * e[j]).sum::<f64>() / rf)
        .collect();
    let rmse: Vec<f64> = msq.iter().map(|m| m.sqrt()).collect();
    let p = cols.len() as f64;
    let avg = rmse.iter().sum::<f64>() / p;
    let infl: Vec<f64> = errors
        .iter()
        .map(|e| {
            cols.iter()
                .zip(msq.iter().zip(&rmse))
                .map(|(&j, (m, s))| if *s > 0.0 { (e[j] * e[j] - m) / (2.0 * s) } else { 0.0 })
                .sum::<f64>()
                / p
        })
        .collect();
    let var = if reps > 1 {
        infl.iter().map(|v| v * v).sum::<f64>() / (rf - 1.0)
    } else {
        0.0
    };
    (avg, (var / rf).sqrt())
}

/// Per-replication outcome: the estimate of every `(loss, method)` pair,
/// `None` where the fit failed.
type RepOutcome = Vec<Option<Vec<f64>>>;

fn cell_stream(cfg: &ExperimentConfig, setting: usize, n_index: usize) -> RngStream {
    RngStream::new(cfg.seed, (cfg.experiment.tag() << 32) | ((setting as u64) << 16) | n_index as u64)
}

fn cell_name(n: usize, p: &NoiseParams) -> String {
    format!("n{n}_zm{}_lam{}", p.zero_mass, p.scale)
}

fn fit_all(
    data: &EstimationData,
    losses: &[BuiltinLoss],
    methods: &[Method],
    optim_seed: u64,
) -> RepOutcome {
    let mut out = Vec::with_capacity(losses.len() * methods.len());
    for loss in losses {
        for &method in methods {
            let mut opts = EstimateOptions {
                strict_sl: false,
                covariance: false,
                ..EstimateOptions::default()
            };
            opts.optim.seed = optim_seed;
            out.push(estimate(method, data, loss, &opts).ok().map(|r| r.theta_hat));
        }
    }
    out
}

/// Simulated data of one replication: the clean matrix, its support and
/// the true parameter of each loss.
struct Design {
    values: RowMatrix,
    support: SupportBox,
}

fn uniform_design(n: usize, stream: &RngStream) -> Result<Design> {
    let mut r = stream.rng();
    let v: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    Ok(Design {
        values: RowMatrix::from_vec(n, 1, v)?,
        support: SupportBox::cube(0.0, 1.0, 1)?,
    })
}

/// Truncated normal covariates on `[-1, 1]^6`, then the response column.
fn regression_design(n: usize, logistic_model: bool, stream: &RngStream) -> Result<Design> {
    const P: usize = 6;
    let x = sample_truncated_normal(&[-1.0; P], &[1.0; P], n, &stream.substream(0))?;
    let mut r = stream.substream(1).rng();
    let mut v = Vec::with_capacity(n * (P + 1));
    for row in x.rows_iter() {
        let eta: f64 = row.iter().sum();
        let y = if logistic_model {
            if r.random::<f64>() < logistic(eta) {
                1.0
            } else {
                0.0
            }
        } else {
            let e: f64 = r.sample(StandardNormal);
            1.0 + eta + e
        };
        v.extend_from_slice(row);
        v.push(y);
    }
    let (ylo, yhi) = if logistic_model {
        (0.0, 1.0)
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    let mut lower = vec![-1.0; P];
    let mut upper = vec![1.0; P];
    lower.push(ylo);
    upper.push(yhi);
    let mut mask = vec![true; P];
    mask.push(false);
    Ok(Design {
        values: RowMatrix::from_vec(n, P + 1, v)?,
        support: SupportBox::new(lower, upper, mask)?,
    })
}

fn truth(experiment: Experiment, loss: &BuiltinLoss) -> Vec<f64> {
    match experiment {
        Experiment::Table1 => vec![loss.uniform_target().unwrap_or(f64::NAN)],
        Experiment::Table2 => vec![1.0; 6],
        _ => vec![1.0; 7],
    }
}

fn parameter_names(experiment: Experiment, p: usize) -> Vec<String> {
    match experiment {
        Experiment::Table1 => vec!["theta".into()],
        Experiment::Table2 => (1..=p).map(|j| format!("beta{j}")).collect(),
        _ => (0..p).map(|j| format!("beta{j}")).collect(),
    }
}

/// Runs one `(n, noise)` cell of a table.
pub fn run_cell(cfg: &ExperimentConfig, setting: usize, n_index: usize) -> Result<ResultTable> {
    let exp = cfg.experiment;
    let n = cfg.n[n_index];
    let params = cfg.noise[setting];
    let losses: Vec<BuiltinLoss> = match exp {
        Experiment::Table1 => cfg.losses.iter().map(|l| l.parse()).collect::<zildp_core::Result<_>>()?,
        _ => vec![cfg.losses[0].parse()?],
    };
    let methods = cfg.methods.clone();
    let base = cell_stream(cfg, setting, n_index);
    let reps = cfg.effective_replications();
    let outcomes: Vec<Result<RepOutcome>> = replicate(reps, |r| {
        let s = base.substream(r as u64);
        let design = match exp {
            Experiment::Table1 => uniform_design(n, &s.substream(0))?,
            Experiment::Table2 => regression_design(n, true, &s.substream(0))?,
            _ => regression_design(n, false, &s.substream(0))?,
        };
        let ds = Dataset::with_default_names(design.values, design.support)?;
        let bundle = drdp_release(&ds, &params, &s.substream(1))?;
        let data = EstimationData::from_bundle(&bundle, Some(&ds.values))?;
        Ok(fit_all(&data, &losses, &methods, s.substream(2).stream_id))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut table = ResultTable::default();
    for (li, loss) in losses.iter().enumerate() {
        let theta0 = truth(exp, loss);
        let names = parameter_names(exp, theta0.len());
        for (mi, method) in methods.iter().enumerate() {
            let k = li * methods.len() + mi;
            let errors: Vec<Vec<f64>> = outcomes
                .iter()
                .filter_map(|o| o[k].as_ref())
                .map(|t| t.iter().zip(&theta0).map(|(a, b)| a - b).collect())
                .collect();
            let failed = reps - errors.len();
            let mut row = |parameter: String, cols: &[usize]| {
                let (rmse, mc_se) = rmse_summary(&errors, cols);
                table.rows.push(ResultRow {
                    experiment: exp.as_str().into(),
                    n,
                    zero_mass: params.zero_mass,
                    lambda: params.scale,
                    loss: loss.name(),
                    method: method.as_str().into(),
                    parameter,
                    rmse,
                    mc_se,
                    replications: errors.len(),
                    failed,
                });
            };
            for (j, name) in names.iter().enumerate() {
                row(name.clone(), &[j]);
            }
            let slopes: Vec<usize> = match exp {
                Experiment::Table1 => vec![],
                Experiment::Table2 => (0..6).collect(),
                _ => (1..7).collect(),
            };
            if !slopes.is_empty() {
                row("avg_slope".into(), &slopes);
            }
        }
    }
    Ok(table)
}


#[derive(Debug, Clone, Serialize)]
struct ManifestCell {
    file: String,
    n: usize,
    zero_mass: f64,
    lambda: f64,
    failed_fits: usize,
}

#[derive(Debug, Clone, Serialize)]
struct Versions {
    zildp: &'static str,
    generator: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct ExperimentManifest {
    experiment: &'static str,
    seed: u64,
    replications: usize,
    config: ExperimentConfig,
    versions: Versions,
    cells: Vec<ManifestCell>,
    files: Vec<String>,
    notes: Vec<String>,
}

fn versions() -> Versions {
    Versions {
        zildp: env!("CARGO_PKG_VERSION"),
        generator: GENERATOR,
    }
}

fn table_notes(cfg: &ExperimentConfig) -> Vec<String> {
    let mut notes = vec!["rmse is the root mean squared error against the data-generating parameter; mc_se is its delta-method Monte Carlo standard error; avg_slope rows average the per-coefficient rmse over the noised coefficients".to_string()];
    if cfg.experiment == Experiment::Table1 {
        notes.push(
            "privacy labels: (zero_mass 0.1, lambda 0.94) is (1.5, 0.1)-DP; (zero_mass 0.05, lambda 1.4) is (1, 0.05)-DP, which the source table caption labels (1.5, 0.05)-DP"
                .into(),
        );
        notes.push("sl fits of losses without an x-Laplacian drop the correction term".into());
    }
    notes
}

/// Runs every cell of a table experiment, writing
/// `<output_dir>/<experiment>/<cell>.csv` and `manifest.json`.
pub fn run_table(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if cfg.experiment == Experiment::Figure1 {
        return Err(AppError::Usage("figure1 is not a table experiment".into()));
    }
    cfg.validate().map_err(AppError::Usage)?;
    let dir = cfg.output_dir.join(cfg.experiment.as_str());
    let mut all = ResultTable::default();
    let mut cells = Vec::new();
    for setting in 0..cfg.noise.len() {
        for n_index in 0..cfg.n.len() {
            let t = run_cell(cfg, setting, n_index)?;
            let name = format!("{}.csv", cell_name(cfg.n[n_index], &cfg.noise[setting]));
            t.write_csv(&dir.join(&name))?;
            let failed_fits = t.rows.iter().filter(|r| r.parameter != "avg_slope").map(|r| r.failed).max().unwrap_or(0);
            cells.push(ManifestCell {
                file: name,
                n: cfg.n[n_index],
                zero_mass: cfg.noise[setting].zero_mass,
                lambda: cfg.noise[setting].scale,
                failed_fits,
            });
            all.extend(t);
        }
    }
    let manifest = ExperimentManifest {
        experiment: cfg.experiment.as_str(),
        seed: cfg.seed,
        replications: cfg.effective_replications(),
        config: cfg.clone(),
        versions: versions(),
        files: cells.iter().map(|c| c.file.clone()).collect(),
        cells,
        notes: table_notes(cfg),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(all)
}

pub fn run_table1(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_table(&ExperimentConfig {
        experiment: Experiment::Table1,
        ..cfg.clone()
    })
}

pub fn run_table2(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_table(&ExperimentConfig {
        experiment: Experiment::Table2,
        ..cfg.clone()
    })
}

pub fn run_table3(cfg: &ExperimentConfig) -> Result<ResultTable> {
    run_table(&ExperimentConfig {
        experiment: Experiment::Table3,
        ..cfg.clone()
    })
}

/// Same curve as [`zildp_core::tradeoff::empirical_tradeoff`], with the
/// simulation chunks spread over the rayon pool.
pub fn empirical_tradeoff_par(d: usize, c: f64, n_sim: usize, rng: &RngStream) -> Result<TradeoffCurve> {
    if n_sim < 10_000 {
        return Err(zildp_core::Error::Parameter {
            name: "n_sim",
            reason: format!("need at least 10^4 simulations, got {n_sim}"),
        }
        .into());
    }
    let plan: Vec<(u64, usize)> = chunk_plan(n_sim).collect();
    let parts = plan
        .par_iter()
        .map(|&(k, len)| {
            Ok((
                lr_statistics_chunk(d, c, Hypothesis::Null, k, len, rng)?,
                lr_statistics_chunk(d, c, Hypothesis::Alternative, k, len, rng)?,
            ))
        })
        .collect::<zildp_core::Result<Vec<_>>>()?;
    let mut null = Vec::with_capacity(n_sim);
    let mut alt = Vec::with_capacity(n_sim);
    for (a, b) in parts {
        null.extend(a);
        alt.extend(b);
    }
    let mut curve = roc_from_statistics(&mut null, &mut alt, &alpha_grid(GRID_POINTS))?;
    curve.label = format!("empirical d={d} c={c} n_sim={n_sim}");
    Ok(curve)
}

/// Figure 1 epsilons of the (ε, δ) envelopes.
pub const FIGURE1_EPSILONS: [f64; 7] = [0.5, 0.7, 0.9, 1.2, 1.6, 2.1, 2.8];
/// Figure 1(b) values of `c`.
pub const FIGURE1_PANEL_B: [f64; 4] = [0.2, 0.5, 0.8, 1.0];
pub const FIGURE1_C: f64 = 0.5;

/// Curves of Figure 1, in the order they are written.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    /// `β_{0.5,δ}`.
    pub limit: TradeoffCurve,
    /// Empirical `T_{2,0.5,δ}` and `T_{4,0.5,δ}`.
    pub empirical: Vec<TradeoffCurve>,
    /// `f_{ε, δ̃_{0.5,δ}(ε)}` for each ε of [`FIGURE1_EPSILONS`].
    pub envelopes: Vec<TradeoffCurve>,
    /// `β_{c,δ}` for each c of [`FIGURE1_PANEL_B`].
    pub panel_b: Vec<TradeoffCurve>,
}

impl Figure1 {
    /// Largest amount by which an envelope exceeds `β_{0.5,δ}`.
    pub fn envelope_violation(&self) -> f64 {
        self.envelopes
            .iter()
            .flat_map(|e| e.betas.iter().zip(&self.limit.betas).map(|(f, b)| f - b))
            .fold(0.0, f64::max)
    }
}

pub fn figure1_curves(cfg: &ExperimentConfig) -> Result<Figure1> {
    let zm = cfg.noise[0].zero_mass;
    let grid = alpha_grid(GRID_POINTS);
    let mut limit = beta_c_delta_curve(FIGURE1_C, zm, grid.clone())?;
    limit.label = format!("beta c={FIGURE1_C} zero_mass={zm}");
    let base = RngStream::new(cfg.seed, Experiment::Figure1.tag() << 32);
    let empirical = [2usize, 4]
        .iter()
        .map(|&d| {
            let t = empirical_tradeoff_par(d, FIGURE1_C, cfg.n_sim, &base.substream(d as u64))?;
            Ok(tradeoff_shrink(&t, zm)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let envelopes = FIGURE1_EPSILONS
        .iter()
        .map(|&eps| {
            let delta = delta_profile_zil(FIGURE1_C, eps, zm)?;
            let budget = PrivacyBudget::new(eps, delta)?;
            Ok(TradeoffCurve::from_fn(grid.clone(), format!("envelope epsilon={eps} delta={delta}"), |a| {
                f_eps_delta(a, &budget)
            })?)
        })
        .collect::<Result<Vec<_>>>()?;
    let panel_b = FIGURE1_PANEL_B
        .iter()
        .map(|&c| {
            let mut b = beta_c_delta_curve(c, zm, grid.clone())?;
            b.label = format!("beta c={c} zero_mass={zm}");
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Figure1 {
        limit,
        empirical,
        envelopes,
        panel_b,
    })
}

/// Writes the Figure 1 curve files and the manifest.
pub fn run_figure1(cfg: &ExperimentConfig) -> Result<(Figure1, Vec<PathBuf>)> {
    cfg.validate().map_err(AppError::Usage)?;
    let fig = figure1_curves(cfg)?;
    let dir = cfg.output_dir.join("figure1");
    let files = [
        ("limit.csv", vec![&fig.limit]),
        ("empirical.csv", fig.empirical.iter().collect()),
        ("envelopes.csv", fig.envelopes.iter().collect()),
        ("panel_b.csv", fig.panel_b.iter().collect()),
    ];
    let mut paths = Vec::new();
    for (name, curves) in &files {
        let p = dir.join(name);
        write_curves_csv(&p, curves)?;
        paths.push(p);
    }
    let manifest = ExperimentManifest {
        experiment: "figure1",
        seed: cfg.seed,
        replications: 1,
        config: cfg.clone(),
        versions: versions(),
        cells: vec![],
        files: files.iter().map(|(n, _)| n.to_string()).collect(),
        notes: vec![format!(
            "largest envelope excess over the limit curve: {:e}; sup distance of the d=2, d=4 curves to the limit: {}, {}",
            fig.envelope_violation(),
            fig.empirical[0].sup_distance(&fig.limit),
            fig.empirical[1].sup_distance(&fig.limit)
        )],
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok((fig, paths))
}

#[cfg(test)]
mod tests {
    use super::*;
    use zildp_core::tradeoff::empirical_tradeoff;

    #[test]
    fn rmse_summary_matches_direct_formula() {
        let errors = vec![vec![1.0, 2.0], vec![-1.0, 0.0], vec![3.0, -2.0]];
        let (avg, se) = rmse_summary(&errors, &[0]);
        assert!((avg - (11.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(se > 0.0);
        let (both, _) = rmse_summary(&errors, &[0, 1]);
        let r1 = (8.0f64 / 3.0).sqrt();
        assert!((both - 0.5 * (avg + r1)).abs() < 1e-15);
        assert_eq!(rmse_summary(&[vec![0.0], vec![0.0]], &[0]), (0.0, 0.0));
    }

    #[test]
    fn parallel_curve_matches_serial() {
        let rng = RngStream::new(4, 4);
        let a = empirical_tradeoff(2, 0.5, 20_000, &rng).unwrap();
        let b = empirical_tradeoff_par(2, 0.5, 20_000, &rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_keeps_order() {
        let v = replicate(100, |r| r * r);
        assert_eq!(v, (0..100).map(|r| r * r).collect::<Vec<_>>());
    }

    #[test]
    fn small_table1_cell_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::defaults(Experiment::Table1);
        cfg.n = vec![200];
        cfg.replications = 20;
        cfg.noise.truncate(1);
        cfg.output_dir = dir.path().to_path_buf();
        let t = run_table(&cfg).unwrap();
        assert_eq!(t.rows.len(), 9);
        let file = dir.path().join("table1/n200_zm0.1_lam0.94.csv");
        let first = std::fs::read(&file).unwrap();
        assert_eq!(ResultTable::read_csv(&file).unwrap(), t);
        run_table(&cfg).unwrap();
        assert_eq!(std::fs::read(&file).unwrap(), first);
        let oracle = t.find(200, 0.1, 0.94, "mean-relu", Method::Oracle, "theta").unwrap();
        assert!(oracle.rmse < 0.05 && oracle.failed == 0, "{oracle:?}");
    }
}
