use std::path::Path;

use anyhow::{bail, Context, Result};
use funssl_core::eval::ERROR_TOLERANCE_DEG;
use funssl_core::network::ModelConfig;
use funssl_core::sim::{DatasetConfig, SceneConfig};
use funssl_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Activity threshold when none is calibrated or given.
    pub threshold: f64,
    pub tolerance_deg: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            tolerance_deg: ERROR_TOLERANCE_DEG,
        }
    }
}

/// Everything a run needs besides file paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    pub seed: u64,
    pub scene: SceneConfig,
    /// Scenes generated by `simulate` when `--count` is not given.
    pub count: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            seed: 0,
            scene: SceneConfig::default(),
            count: DatasetConfig::default().count,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is absent.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("config {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            bail!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                self.config_version
            );
        }
        self.scene.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if !(self.eval.tolerance_deg > 0.0) {
            bail!("eval.tolerance_deg must be positive");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).with_context(|| format!("writing {}", path.display()))
    }
}
