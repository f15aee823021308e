use crate::env::EnvKind;
use crate::planners::{PlannerConfig, Variant};
use crate::trainer::{Hyperparams, TrainSpec};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Everything needed to reproduce a training run and its evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub env: EnvKind,
    pub train_min_size: usize,
    pub train_max_size: usize,
    pub eval_sizes: Vec<usize>,
    pub episodes: usize,
    /// Evaluation episodes per size and seed.
    pub eval_episodes: usize,
    pub eval_seeds: Vec<u64>,
    pub seed: u64,
    pub curriculum: bool,
    pub hidden_channels: usize,
    pub d_rew: usize,
    pub output_dir: PathBuf,
    pub hyperparams: Hyperparams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::MvProp,
            env: EnvKind::Static,
            train_min_size: 8,
            train_max_size: 12,
            eval_sizes: vec![12, 32, 64],
            episodes: 60_000,
            eval_episodes: 40,
            eval_seeds: super::DEFAULT_EVAL_SEEDS.to_vec(),
            seed: 0,
            curriculum: true,
            hidden_channels: 8,
            d_rew: 1,
            output_dir: PathBuf::from("runs/default"),
            hyperparams: Hyperparams::default(),
        }
    }
}

impl RunConfig {
    /// TOML with keys in sorted order, so equal configs give equal text.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        // toml::Value tables are ordered maps
        let value = toml::Value::try_from(self)?;
        Ok(toml::to_string(&value)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.train_min_size < 6 || self.train_min_size > self.train_max_size {
            return bad("train sizes need 6 <= train_min_size <= train_max_size");
        }
        if self.eval_sizes.iter().any(|&s| s < 6) {
            return bad("evaluation sizes must be at least 6");
        }
        if self.hidden_channels == 0 || self.d_rew == 0 {
            return bad("hidden_channels and d_rew must be positive");
        }
        let hp = &self.hyperparams;
        if hp.batch_size == 0 || hp.update_period == 0 || hp.buffer_capacity == 0 {
            return bad("batch_size, update_period and buffer_capacity must be positive");
        }
        if !(hp.lr > 0.0) || !(hp.importance_cap > 0.0) {
            return bad("lr and importance_cap must be positive");
        }
        Ok(())
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            variant: self.variant,
            hidden_channels: self.hidden_channels,
            d_rew: self.d_rew,
        }
    }

    pub fn train_spec(&self) -> TrainSpec {
        TrainSpec {
            env: self.env,
            min_size: self.train_min_size,
            max_size: self.train_max_size,
            episodes: self.episodes,
            seed: self.seed,
            curriculum: self.curriculum,
            hp: self.hyperparams,
        }
    }
}
