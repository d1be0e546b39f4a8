//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sharpnet_core::data::SplitSpec;
use sharpnet_core::haar::{HaarKernel, DEFAULT_THRESHOLD_DB};
use sharpnet_core::model::SharpNetConfig;

use crate::error::{CliError, Result};
use crate::files::read_bytes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 4,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HaarConfig {
    /// Kernel specs such as `vedge:4x2` or `diag:4x4:x2`.
    pub kernels: Vec<HaarKernel>,
    pub threshold_db: f64,
    /// Zero responses on background pixels using the ground-truth mask.
    /// Masks are unavailable at prediction time, so this is off by default.
    pub refine_with_masks: bool,
}

impl Default for HaarConfig {
    fn default() -> Self {
        Self {
            kernels: HaarKernel::default_bank(),
            threshold_db: DEFAULT_THRESHOLD_DB,
            refine_with_masks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub root: PathBuf,
    pub split: SplitSpec,
    /// Map unknown mask colours to background instead of failing.
    pub lenient_colors: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            root: PathBuf::from("data"),
            split: SplitSpec::default(),
            lenient_colors: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: SharpNetConfig,
    pub train: TrainConfig,
    pub haar: HaarConfig,
    pub data: DataConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path).map_err(|e| CliError::Config(e.to_string()))?;
        let text = String::from_utf8(bytes).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e)))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.train.batch_size == 0 {
            return Err(CliError::Config("train.batch_size must be positive".into()));
        }
        if self.train.lr.is_nan() || self.train.lr <= 0.0 {
            return Err(CliError::Config("train.lr must be positive".into()));
        }
        if self.model.injection.enabled && self.haar.kernels.len() != self.model.injection.bank_channels {
            return Err(CliError::Config(format!(
                "{} Haar kernels for a {}-channel injection bank",
                self.haar.kernels.len(),
                self.model.injection.bank_channels
            )));
        }
        Ok(())
    }

    /// Overrides every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.model.seed = seed;
        self.train.seed = seed;
        self.data.split.seed = seed;
        self
    }

    /// Every configuration key with its default, one per line.
    pub fn describe_defaults() -> String {
        let value = serde_json::to_value(Self::default()).expect("config serializes");
        let mut lines = Vec::new();
        flatten("", &value, &mut lines);
        lines.join("\n")
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Vec<String>) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push(format!("  {prefix} = {other}")),
    }
}
