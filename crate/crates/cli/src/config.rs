//! Optional JSON run configuration. Values here override built-in defaults and
//! are themselves overridden by command-line flags.

use std::path::{Path, PathBuf};

use meshspectra::metrics::{LogBase, LossWeights};
use meshspectra::spectral::DEFAULT_DENSE_CEILING;
use meshspectra::Error;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub dense_ceiling: Option<usize>,
    pub allow_large: Option<bool>,
    pub log_base: Option<LogBase>,
    pub metrics: MetricsConfig,
    pub noise_sweep: SweepConfig,
    pub gradcheck: GradcheckConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub weights: Option<LossWeights>,
    pub chamfer_mode: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub bands: Option<String>,
    pub amplitudes: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub model: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub size: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> meshspectra::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("config {}: {e}", path.display())))
    }
}

/// Global settings after merging flags, config and defaults.
#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    pub out: PathBuf,
    pub dense_ceiling: usize,
    pub allow_large: bool,
    pub log_base: LogBase,
}

impl Settings {
    pub fn cache_dir(&self) -> PathBuf {
        std::env::var_os("MESHSPECTRA_CACHE")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out.join(".cache"))
    }
}

pub fn resolve(
    config: &RunConfig,
    seed: Option<u64>,
    out: Option<PathBuf>,
    dense_ceiling: Option<usize>,
    allow_large: bool,
    log_base: Option<LogBase>,
) -> Settings {
    Settings {
        seed: seed.or(config.seed).unwrap_or(0),
        out: out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        dense_ceiling: dense_ceiling.or(config.dense_ceiling).unwrap_or(DEFAULT_DENSE_CEILING),
        allow_large: allow_large || config.allow_large.unwrap_or(false),
        log_base: log_base.or(config.log_base).unwrap_or_default(),
    }
}
