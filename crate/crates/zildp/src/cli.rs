//! The `zildp` command.
//!
//! Every subcommand prints the seed it used and writes a manifest JSON
//! (`--manifest`, or a default path next to its main output). A
//! `--config <json>` object overrides the subcommand's flags key by key.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use zildp_core::estimation::{estimate, EstimateOptions, EstimationData, Method};
use zildp_core::losses::BuiltinLoss;
use zildp_core::mechanism::{diam_attribute, diam_individual, drdp_release, Dataset, SupportBox};
use zildp_core::tradeoff::{
    alpha_grid, beta_c_curve, beta_c_delta_curve, calibrate, tradeoff_shrink, PrivacyBudget, PrivacyMode,
};
use zildp_core::{NoiseParams, RngStream, GENERATOR};

use crate::config::{merge, Experiment, ExperimentConfig};
use crate::error::{AppError, Result};
use crate::experiments::{empirical_tradeoff_par, run_figure1, run_table};
use crate::io;

pub const DEFAULT_SEED: u64 = 20240607;

#[derive(Debug, Parser)]
#[command(name = "zildp", version, about = "Zero-inflated Laplace privacy: release, trade-off curves and corrected-loss estimation")]
pub struct Cli {
    /// JSON object whose keys override the subcommand's flags
    #[arg(long, global = true, value_name = "JSON")]
    pub config: Option<PathBuf>,

    /// Random seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Where to write the run manifest
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noise scale for an (epsilon, delta) target
    Calibrate(CalibrateArgs),
    /// DRDP release of a CSV dataset
    Release(ReleaseArgs),
    /// Trade-off curves as CSV
    Tradeoff(TradeoffArgs),
    /// Fit an M-estimator on a release bundle or a plain dataset
    Estimate(EstimateArgs),
    /// Reproduce a table or figure
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Adp,
    Dp,
}

impl From<Mode> for PrivacyMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Adp => PrivacyMode::Adp,
            Mode::Dp => PrivacyMode::Dp,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta_dp: f64,
    #[arg(long)]
    pub zero_mass: f64,
    /// Support JSON (`lower`, `upper`, `private_mask`)
    #[arg(long, required_unless_present = "diameter")]
    pub support: Option<PathBuf>,
    /// Use this diameter instead of one computed from a support file
    #[arg(long, conflicts_with = "support")]
    pub diameter: Option<f64>,
    #[arg(long, value_enum, default_value = "adp")]
    pub mode: Mode,
    /// Write the calibration as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReleaseArgs {
    /// CSV with a header row
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub support: PathBuf,
    #[arg(long)]
    pub zero_mass: f64,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub stream_id: u64,
    /// Writes `<prefix>.x1.csv`, `<prefix>.x2.csv` and `<prefix>.meta.json`
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffArgs {
    /// Signal-to-noise ratio `diam / lambda`
    #[arg(long, required_unless_present = "support")]
    pub c: Option<f64>,
    /// Compute `c` from a support file and `--lambda` instead
    #[arg(long, conflicts_with = "c", requires = "lambda")]
    pub support: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum, default_value = "adp")]
    pub mode: Mode,
    /// Shrink the curves by this zero mass
    #[arg(long)]
    pub zero_mass: Option<f64>,
    /// Also simulate the finite-dimension curve in this dimension
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    pub n_sim: usize,
    /// Grid size of the limit curve
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateArgs {
    /// Release bundle prefix
    #[arg(long, required_unless_present = "data", conflicts_with = "data")]
    pub bundle: Option<PathBuf>,
    /// Plain CSV dataset (oracle / naive fits only)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Clean data matching the bundle, enabling the oracle fit
    #[arg(long, requires = "bundle")]
    pub original: Option<PathBuf>,
    /// Public columns of `--data` (default: the column named `y`, if any)
    #[arg(long, value_delimiter = ',')]
    pub public: Option<Vec<String>>,
    /// mean-relu | mean-indicator | mean-abssin | logistic | linear | check:<tau> | quantile:<tau>
    #[arg(long)]
    pub loss: String,
    #[arg(long, value_parser = parse_method)]
    pub method: Method,
    /// Quantile level for the check / quantile losses
    #[arg(long)]
    pub tau: Option<f64>,
    /// Skip the sandwich covariance
    #[arg(long)]
    #[serde(default)]
    pub no_covariance: bool,
    /// Let SL run on losses without an x-Laplacian (the term is dropped)
    #[arg(long)]
    #[serde(default)]
    pub lenient_sl: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: zildp_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Which experiment (a config file may name it instead)
    #[arg(long, value_enum)]
    pub name: Option<Experiment>,
    /// Sample sizes
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Multiplier on the replication count
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub n_sim: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: Option<u64>,
    args: Value,
    versions: Value,
    outputs: Vec<String>,
}

fn write_manifest(path: &Path, command: &str, seed: Option<u64>, args: Value, outputs: &[PathBuf]) -> Result<()> {
    let m = Manifest {
        command,
        seed,
        args,
        versions: json!({"zildp": env!("CARGO_PKG_VERSION"), "generator": GENERATOR}),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    io::write_json(path, &m)?;
    println!("manifest: {}", path.display());
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Applies the `--config` object (if any) on top of the parsed flags.
/// The key `seed` is taken out and returned alongside.
fn overlay<T: Serialize + serde::de::DeserializeOwned>(
    args: &T,
    seed: Option<u64>,
    config: Option<&Value>,
) -> Result<(T, Option<u64>)> {
    let Some(cfg) = config else {
        return Ok((serde_json::from_value(serde_json::to_value(args).expect("args serialize")).expect("round trip"), seed));
    };
    let mut v = serde_json::to_value(args).expect("args serialize");
    merge(&mut v, cfg).map_err(AppError::Usage)?;
    let obj = v.as_object_mut().expect("object");
    let seed = match obj.remove("seed") {
        Some(Value::Null) | None => seed,
        Some(s) => Some(s.as_u64().ok_or_else(|| AppError::Usage(format!("config: seed must be an unsigned integer, got {s}")))?),
    };
    let args = serde_json::from_value(v).map_err(|e| AppError::Usage(format!("config: {e}")))?;
    Ok((args, seed))
}

fn support_diameter(support: &SupportBox, mode: Mode) -> zildp_core::Result<f64> {
    match mode {
        Mode::Adp => diam_attribute(support),
        Mode::Dp => diam_individual(support),
    }
}

fn cmd_calibrate(args: &CalibrateArgs, seed: u64, manifest: Option<PathBuf>) -> Result<()> {
    let support = match (&args.support, args.diameter) {
        (Some(p), _) => io::read_support(p)?.0,
        (None, Some(d)) => {
            if !(d > 0.0 && d.is_finite()) {
                return Err(zildp_core::Error::Parameter {
                    name: "diameter",
                    reason: format!("must be positive and finite, got {d}"),
                }
                .into());
            }
            SupportBox::cube(0.0, d, 1)?
        }
        (None, None) => return Err(AppError::Usage("calibrate needs --support or --diameter".into())),
    };
    let mode = if args.diameter.is_some() { PrivacyMode::Adp } else { args.mode.into() };
    let budget = PrivacyBudget::new(args.epsilon, args.delta_dp)?;
    let cal = calibrate(&budget, args.zero_mass, &support, mode)?;
    println!("c_prime = {}", cal.c_prime);
    println!("lambda = {}", cal.lambda);
    println!("diameter = {}", cal.diameter);
    println!("achieved_delta_dp = {}", cal.achieved_delta_dp);
    let mut outputs = Vec::new();
    if let Some(out) = &args.out {
        io::write_json(out, &cal)?;
        outputs.push(out.clone());
    }
    let path = manifest.unwrap_or_else(|| match &args.out {
        Some(o) => suffixed(o, ".manifest.json"),
        None => PathBuf::from("calibrate.manifest.json"),
    });
    write_manifest(&path, "calibrate", Some(seed), serde_json::to_value(args).expect("serialize"), &outputs)
}

fn cmd_release(args: &ReleaseArgs, seed: u64, manifest: Option<PathBuf>) -> Result<()> {
    let (names, values) = io::read_matrix_csv(&args.input)?;
    let (support, support_names) = io::read_support(&args.support)?;
    if let Some(sn) = support_names {
        if sn != names {
            return Err(AppError::format(&args.support, "column_names do not match the data header"));
        }
    }
    let params = NoiseParams::new(args.zero_mass, args.lambda)?;
    let ds = Dataset::new(values, names, support)?;
    let mut bundle = drdp_release(&ds, &params, &RngStream::new(seed, args.stream_id))?;
    bundle.created_at = io::created_at_from_env();
    let paths = io::write_bundle(&args.out_prefix, &bundle)?;
    println!("c_attribute = {}", diam_attribute(&bundle.support)? / params.scale);
    println!("c_individual = {}", diam_individual(&bundle.support)? / params.scale);
    for p in &paths {
        println!("wrote {}", p.display());
    }
    let path = manifest.unwrap_or_else(|| suffixed(&args.out_prefix, ".manifest.json"));
    write_manifest(&path, "release", Some(seed), serde_json::to_value(args).expect("serialize"), &paths)
}

fn cmd_tradeoff(args: &TradeoffArgs, seed: u64, manifest: Option<PathBuf>) -> Result<()> {
    let c = match (args.c, &args.support) {
        (Some(c), _) => c,
        (None, Some(p)) => {
            let lambda = args.lambda.ok_or_else(|| AppError::Usage("--support needs --lambda".into()))?;
            let (support, _) = io::read_support(p)?;
            support_diameter(&support, args.mode)? / lambda
        }
        (None, None) => return Err(AppError::Usage("tradeoff needs --c or --support with --lambda".into())),
    };
    if args.points < 2 {
        return Err(AppError::Usage("--points must be at least 2".into()));
    }
    let grid = alpha_grid(args.points);
    let mut curves = Vec::new();
    let mut limit = match args.zero_mass {
        Some(z) => beta_c_delta_curve(c, z, grid)?,
        None => beta_c_curve(c, grid)?,
    };
    limit.label = match args.zero_mass {
        Some(z) => format!("beta c={c} zero_mass={z}"),
        None => format!("beta c={c}"),
    };
    curves.push(limit);
    if let Some(d) = args.d {
        let t = empirical_tradeoff_par(d, c, args.n_sim, &RngStream::new(seed, 0))?;
        curves.push(match args.zero_mass {
            Some(z) => tradeoff_shrink(&t, z)?,
            None => t,
        });
    }
    io::write_curves_csv(&args.out, &curves.iter().collect::<Vec<_>>())?;
    println!("c = {c}");
    println!("wrote {}", args.out.display());
    let path = manifest.unwrap_or_else(|| suffixed(&args.out, ".manifest.json"));
    write_manifest(&path, "tradeoff", Some(seed), serde_json::to_value(args).expect("serialize"), std::slice::from_ref(&args.out))
}

fn cmd_estimate(args: &EstimateArgs, seed: u64, manifest: Option<PathBuf>) -> Result<()> {
    let mut loss: BuiltinLoss = args.loss.parse()?;
    if let Some(t) = args.tau {
        if !(t > 0.0 && t < 1.0) {
            return Err(zildp_core::Error::Parameter {
                name: "tau",
                reason: format!("must lie in (0, 1), got {t}"),
            }
            .into());
        }
        loss = match loss {
            BuiltinLoss::Check { .. } => BuiltinLoss::Check { tau: t },
            BuiltinLoss::Quantile { .. } => BuiltinLoss::Quantile { tau: t },
            other => return Err(AppError::Usage(format!("--tau does not apply to loss `{}`", zildp_core::losses::Loss::name(&other)))),
        };
    }
    let data = match (&args.bundle, &args.data) {
        (Some(prefix), _) => {
            let bundle = io::read_bundle(prefix)?;
            let original = match &args.original {
                Some(p) => {
                    let (names, m) = io::read_matrix_csv(p)?;
                    if names != bundle.column_names {
                        return Err(AppError::format(p, "columns do not match the bundle"));
                    }
                    Some(m)
                }
                None => None,
            };
            EstimationData::from_bundle(&bundle, original.as_ref())?
        }
        (None, Some(path)) => {
            let (names, m) = io::read_matrix_csv(path)?;
            let public: Vec<String> = match &args.public {
                Some(p) => p.clone(),
                None => names.iter().filter(|n| n.as_str() == "y").cloned().collect(),
            };
            if let Some(missing) = public.iter().find(|p| !names.contains(p)) {
                return Err(AppError::format(path, format!("no column named `{missing}`")));
            }
            let mask: Vec<bool> = names.iter().map(|n| !public.contains(n)).collect();
            EstimationData::new(Some(&m), Some(&m), None, &mask, None)?
        }
        (None, None) => return Err(AppError::Usage("estimate needs --bundle or --data".into())),
    };
    let mut opts = EstimateOptions {
        strict_sl: !args.lenient_sl,
        covariance: !args.no_covariance,
        ..EstimateOptions::default()
    };
    opts.optim.seed = seed;
    let report = estimate(args.method, &data, &loss, &opts)?;
    io::write_json(&args.out, &report)?;
    println!("theta_hat = {:?}", report.theta_hat);
    if let Some(se) = &report.std_errors {
        println!("std_errors = {se:?}");
    }
    println!("wrote {}", args.out.display());
    let path = manifest.unwrap_or_else(|| suffixed(&args.out, ".manifest.json"));
    write_manifest(&path, "estimate", Some(seed), serde_json::to_value(args).expect("serialize"), std::slice::from_ref(&args.out))
}

fn experiment_config(args: &ExperimentArgs, seed: Option<u64>, config: Option<&Value>) -> Result<ExperimentConfig> {
    let from_file = config.and_then(|c| c.get("experiment")).cloned();
    let name = match (args.name, from_file) {
        (_, Some(v)) => serde_json::from_value(v).map_err(|e| AppError::Usage(format!("config: experiment: {e}")))?,
        (Some(n), None) => n,
        (None, None) => return Err(AppError::Usage("experiment needs --name or a config naming the experiment".into())),
    };
    let mut flags = serde_json::Map::new();
    if let Some(n) = &args.n {
        flags.insert("n".into(), json!(n));
    }
    if let Some(r) = args.replications {
        flags.insert("replications".into(), json!(r));
    }
    if let Some(s) = args.scale {
        flags.insert("replication_scale".into(), json!(s));
    }
    if let Some(o) = &args.out_dir {
        flags.insert("output_dir".into(), json!(o));
    }
    if let Some(n) = args.n_sim {
        flags.insert("n_sim".into(), json!(n));
    }
    if let Some(s) = seed {
        flags.insert("seed".into(), json!(s));
    }
    let mut merged = Value::Object(flags);
    if let Some(c) = config {
        merge(&mut merged, c).map_err(AppError::Usage)?;
    }
    ExperimentConfig::from_overlay(name, &merged).map_err(|e| AppError::Usage(format!("config: {e}")))
}

fn cmd_experiment(cfg: &ExperimentConfig, manifest: Option<PathBuf>) -> Result<()> {
    println!("experiment: {}", cfg.experiment.as_str());
    println!("replications: {}", cfg.effective_replications());
    let dir = cfg.output_dir.join(cfg.experiment.as_str());
    let outputs = if cfg.experiment == Experiment::Figure1 {
        let (fig, paths) = run_figure1(cfg)?;
        println!("largest envelope excess: {:e}", fig.envelope_violation());
        paths
    } else {
        let table = run_table(cfg)?;
        for r in table.rows.iter().filter(|r| r.parameter == "avg_slope" || r.parameter == "theta") {
            println!(
                "n={} zero_mass={} lambda={} {} {}: rmse {:.4} ± {:.4}",
                r.n, r.zero_mass, r.lambda, r.loss, r.method, r.rmse, r.mc_se
            );
        }
        let mut cells = Vec::new();
        for p in &cfg.noise {
            for &n in &cfg.n {
                cells.push(dir.join(format!("n{n}_zm{}_lam{}.csv", p.zero_mass, p.scale)));
            }
        }
        cells
    };
    println!("manifest: {}", dir.join("manifest.json").display());
    if let Some(m) = manifest {
        write_manifest(&m, "experiment", Some(cfg.seed), serde_json::to_value(cfg).expect("serialize"), &outputs)?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let config: Option<Value> = match &cli.config {
        Some(p) => Some(io::read_json(p)?),
        None => None,
    };
    if config.as_ref().is_some_and(|c| !c.is_object()) {
        return Err(AppError::Usage("--config must hold a JSON object".into()));
    }
    let resolve = |s: Option<u64>| {
        let s = s.unwrap_or(DEFAULT_SEED);
        println!("seed: {s}");
        s
    };
    match &cli.command {
        Command::Calibrate(a) => {
            let (a, s) = overlay(a, cli.seed, config.as_ref())?;
            cmd_calibrate(&a, resolve(s), cli.manifest)
        }
        Command::Release(a) => {
            let (a, s) = overlay(a, cli.seed, config.as_ref())?;
            cmd_release(&a, resolve(s), cli.manifest)
        }
        Command::Tradeoff(a) => {
            let (a, s) = overlay(a, cli.seed, config.as_ref())?;
            cmd_tradeoff(&a, resolve(s), cli.manifest)
        }
        Command::Estimate(a) => {
            let (a, s) = overlay(a, cli.seed, config.as_ref())?;
            cmd_estimate(&a, resolve(s), cli.manifest)
        }
        Command::Experiment(a) => {
            let cfg = experiment_config(a, cli.seed, config.as_ref())?;
            resolve(Some(cfg.seed));
            cmd_experiment(&cfg, cli.manifest)
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code: 0 success, 1 usage, 2 data error, 3 numeric or inference
/// error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 1,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
