//! Run configuration: a TOML file whose values command-line flags override.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spottune::market::{parse_timestamp, Catalog, InstanceType};
use spottune::orchestrator::SimConfig;

use crate::error::{usage, CliError};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "SPOTTUNE_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Manifest {
    pub seed: Option<u64>,
    /// Directory of regularized per-instance price files.
    pub traces: Option<PathBuf>,
    /// Workload bundle (JSON).
    pub workload: Option<PathBuf>,
    /// Directory of trained predictor models.
    pub models: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// `predictor`, `historical` or `constant:<p>`.
    pub estimator: Option<String>,
    /// Instance types; the built-in reference catalog when absent.
    pub catalog: Option<Vec<InstanceType>>,
    pub baselines: Baselines,
    pub simulation: SimConfig,
    pub revpred: RevPredSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Baselines {
    /// Defaults to the type with the lowest on-demand price.
    pub cheapest: Option<String>,
    /// Defaults to the type with the most vCPUs.
    pub fastest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevPredSection {
    pub train_until: Option<Instant>,
    pub eval_from: Option<Instant>,
    /// Seconds between samples.
    pub stride: i64,
    pub epochs: usize,
    pub hidden: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub logistic_learning_rate: f64,
    /// Model used by the `predictor` estimator.
    pub architecture: String,
}

impl Default for RevPredSection {
    fn default() -> Self {
        Self {
            train_until: None,
            eval_from: None,
            stride: 600,
            epochs: 10,
            hidden: 16,
            batch_size: 64,
            learning_rate: 0.005,
            logistic_learning_rate: 0.05,
            architecture: "sequence".into(),
        }
    }
}

/// Epoch seconds or a date-time string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Instant {
    Epoch(i64),
    Text(String),
}

impl Instant {
    pub fn resolve(&self) -> Result<i64, CliError> {
        match self {
            Instant::Epoch(t) => Ok(*t),
            Instant::Text(s) => parse_timestamp(s).ok_or_else(|| usage(format!("unparseable time {s:?}"))),
        }
    }
}

impl std::str::FromStr for Instant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match parse_timestamp(s) {
            Some(t) => Ok(Instant::Epoch(t)),
            None => Err(format!("unparseable time {s:?}")),
        }
    }
}

impl Manifest {
    /// Reads `path`, or the file named by [`CONFIG_ENV`], or returns the
    /// defaults. Relative paths inside the file are resolved against its
    /// directory.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let Some(path) = path.map(Path::to_path_buf).or(env) else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut m: Manifest =
            toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.traces, &mut m.workload, &mut m.models, &mut m.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.simulation.seed)
    }

    pub fn catalog(&self) -> Result<Catalog, CliError> {
        match &self.catalog {
            Some(list) => Ok(Catalog::new(list.clone())?),
            None => Ok(Catalog::reference()),
        }
    }

    pub fn require(field: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
        field
            .clone()
            .ok_or_else(|| usage(format!("no {name} path: pass --{name} or set it in the config file")))
    }
}
