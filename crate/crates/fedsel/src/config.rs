//! Top-level JSON config shared by the CLI commands. Every field has a
//! default matching the reference simulation parameters, so `{}` is a valid
//! config file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiments::ExperimentConfig;
use crate::spectrum::{BucketConfig, QHyperparams, WorkloadConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub experiment: ExperimentConfig,
    pub spectrum: SpectrumConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumConfig {
    pub workload: WorkloadConfig,
    pub buckets: BucketConfig,
    pub hyper: QHyperparams,
    pub train_seed: u64,
    pub eval_seed: u64,
    pub eval_episodes: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            workload: WorkloadConfig::default(),
            buckets: BucketConfig::default(),
            hyper: QHyperparams::default(),
            train_seed: 0,
            eval_seed: 1,
            eval_episodes: 20,
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: AppConfig = serde_json::from_str(&text)
            .map_err(|e| crate::Error::Config(format!("malformed {}: {e}", path.display())))?;
        Ok(config)
    }
}
