//! Experiment configuration and JSON overlays.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use zildp_core::estimation::Method;
use zildp_core::NoiseParams;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Table1,
    Table2,
    Table3,
    Figure1,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::Table3 => "table3",
            Experiment::Figure1 => "figure1",
        }
    }

    pub(crate) fn tag(&self) -> u64 {
        match self {
            Experiment::Table1 => 1,
            Experiment::Table2 => 2,
            Experiment::Table3 => 3,
            Experiment::Figure1 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Sample sizes (unused by figure1).
    pub n: Vec<usize>,
    pub replications: usize,
    /// Multiplier applied to `replications`.
    pub replication_scale: f64,
    pub noise: Vec<NoiseParams>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub methods: Vec<Method>,
    /// Loss names (table1 runs each; tables 2 and 3 take the first).
    pub losses: Vec<String>,
    /// Monte Carlo draws per hypothesis for the figure1 curves.
    pub n_sim: usize,
}

fn np(zero_mass: f64, scale: f64) -> NoiseParams {
    NoiseParams { zero_mass, scale }
}

impl ExperimentConfig {
    /// The desk-scale defaults of each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            n: vec![],
            replications: 200,
            replication_scale: 1.0,
            noise: vec![],
            seed: 20240607,
            output_dir: PathBuf::from("results"),
            methods: vec![],
            losses: vec![],
            n_sim: 100_000,
        };
        match experiment {
            Experiment::Table1 => ExperimentConfig {
                n: vec![500, 1000],
                replications: 1000,
                noise: vec![np(0.1, 0.94), np(0.05, 1.4)],
                methods: vec![Method::Oracle, Method::Sl, Method::Drcl],
                losses: vec!["mean-relu".into(), "mean-indicator".into(), "mean-abssin".into()],
                ..base
            },
            Experiment::Table2 => ExperimentConfig {
                n: vec![5000, 7500, 10000],
                noise: vec![np(0.2, 0.5), np(0.2, 1.0)],
                methods: vec![Method::Oracle, Method::Naive, Method::Sl, Method::Sdrcl, Method::Drcl],
                losses: vec!["logistic".into()],
                ..base
            },
            Experiment::Table3 => ExperimentConfig {
                n: vec![2500, 5000, 7500],
                noise: vec![np(0.2, 2.0), np(0.2, 2.5)],
                methods: vec![Method::Oracle, Method::Naive, Method::Drcl],
                losses: vec!["check:0.5".into()],
                ..base
            },
            Experiment::Figure1 => ExperimentConfig {
                replications: 1,
                noise: vec![np(0.05, 1.0)],
                ..base
            },
        }
    }

    /// Defaults for the experiment named in `overlay` (or `fallback`),
    /// with the keys of `overlay` written over them.
    pub fn from_overlay(fallback: Experiment, overlay: &Value) -> std::result::Result<Self, String> {
        let experiment = match overlay.get("experiment") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| format!("experiment: {e}"))?,
            None => fallback,
        };
        let mut base = serde_json::to_value(ExperimentConfig::defaults(experiment)).expect("config serializes");
        merge(&mut base, overlay)?;
        let cfg: ExperimentConfig = serde_json::from_value(base).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let v: Value = crate::io::read_json(path)?;
        ExperimentConfig::from_overlay(Experiment::Table1, &v).map_err(|e| AppError::format(path, e))
    }

    /// Replications after scaling (at least one).
    pub fn effective_replications(&self) -> usize {
        ((self.replications as f64 * self.replication_scale).round() as usize).max(1)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.replications == 0 {
            return Err("replications must be positive".into());
        }
        if !(self.replication_scale > 0.0 && self.replication_scale.is_finite()) {
            return Err(format!("replication_scale must be positive, got {}", self.replication_scale));
        }
        if self.noise.is_empty() {
            return Err("at least one noise setting is needed".into());
        }
        for p in &self.noise {
            p.validate().map_err(|e| e.to_string())?;
        }
        if self.experiment != Experiment::Figure1 {
            if self.n.is_empty() || self.n.contains(&0) {
                return Err("n must be a non-empty list of positive sample sizes".into());
            }
            if self.methods.is_empty() || self.losses.is_empty() {
                return Err("methods and losses must be non-empty".into());
            }
            for l in &self.losses {
                l.parse::<zildp_core::losses::BuiltinLoss>().map_err(|e| e.to_string())?;
            }
        } else if self.n_sim < 10_000 {
            return Err(format!("n_sim must be at least 10000, got {}", self.n_sim));
        }
        Ok(())
    }
}

/// Writes the keys of `overlay` into `base`; nested objects merge key by
/// key, anything else replaces.
pub fn merge(base: &mut Value, overlay: &Value) -> std::result::Result<(), String> {
    let Some(over) = overlay.as_object() else {
        return Err("configuration must be a JSON object".into());
    };
    let Some(target) = base.as_object_mut() else {
        return Err("configuration must be a JSON object".into());
    };
    for (k, v) in over {
        match (target.get_mut(k), v) {
            (Some(t @ Value::Object(_)), Value::Object(_)) => merge(t, v)?,
            _ => {
                target.insert(k.clone(), v.clone());
            }
        }
    }
    Ok(())
}
