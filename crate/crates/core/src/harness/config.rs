//! Experiment configuration: a flat TOML table whose keys are the fields of
//! [`ExperimentConfig`]. Unknown keys are an error. Overrides given as
//! `key=value` strings are merged into the table before validation; values
//! are read as TOML scalars, falling back to plain strings.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{BoardConfig, MAX_EPISODE_LEN};
use crate::loss::LossSpec;
use crate::mcts::{RolloutPolicy, SearchConfig};
use crate::network::AdamConfig;
use crate::opponents::OpponentKind;
use crate::trainer::{StopCondition, TrainerConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub opponent: OpponentKind,
    pub board_size: usize,
    pub rigid_fraction: f64,
    pub wood_fraction: f64,
    pub powerup_fraction: f64,
    pub max_steps: u16,

    pub num_workers: usize,
    pub num_demonstrators: usize,
    pub t_max: usize,
    pub rollout_budget: u32,
    pub rollout_policy: RolloutPolicy,
    pub exploration: f64,
    pub max_tree_depth: u32,
    pub rollout_depth: u32,

    pub seeds: Vec<u64>,
    pub max_updates: Option<u64>,
    pub max_model_free_episodes: Option<u64>,
    pub max_wall_clock_s: Option<f64>,

    pub value_weight: f64,
    pub policy_weight: f64,
    pub entropy_weight: f64,
    pub imitation_weight: f64,
    pub gamma: f64,
    pub clip_norm: Option<f64>,

    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,

    /// Seed of the initial network weights (the run seed is mixed in).
    pub init_seed: u64,
    /// Save a checkpoint every this many applied updates (0: final only).
    pub checkpoint_every: u64,
    /// Width of the learning-curve buckets, in model-free episodes.
    pub curve_bucket: u64,
    /// Record elapsed seconds in the metrics stream. Turn off for
    /// byte-identical single-worker runs.
    pub log_wall_clock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let board = BoardConfig::new(8);
        let search = SearchConfig::default();
        let loss = LossSpec::default();
        let adam = AdamConfig::default();
        ExperimentConfig {
            opponent: OpponentKind::Static,
            board_size: board.size,
            rigid_fraction: board.rigid_fraction,
            wood_fraction: board.wood_fraction,
            powerup_fraction: board.powerup_fraction,
            max_steps: MAX_EPISODE_LEN,
            num_workers: 24,
            num_demonstrators: 1,
            t_max: 20,
            rollout_budget: search.rollout_budget,
            rollout_policy: search.rollout_policy,
            exploration: search.exploration,
            max_tree_depth: search.max_tree_depth,
            rollout_depth: search.rollout_depth,
            seeds: vec![1, 2, 3],
            max_updates: None,
            max_model_free_episodes: None,
            max_wall_clock_s: Some(12.0 * 3600.0),
            value_weight: loss.value_weight,
            policy_weight: loss.policy_weight,
            entropy_weight: loss.entropy_weight,
            imitation_weight: loss.imitation_weight,
            gamma: loss.gamma,
            clip_norm: loss.clip_norm,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weight_decay: adam.weight_decay,
            init_seed: 0,
            checkpoint_every: 10_000,
            curve_bucket: 100,
            log_wall_clock: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            table.insert(k.trim().to_string(), parse_scalar(v.trim()));
        }
        let config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn board(&self) -> BoardConfig {
        BoardConfig {
            size: self.board_size,
            rigid_fraction: self.rigid_fraction,
            wood_fraction: self.wood_fraction,
            powerup_fraction: self.powerup_fraction,
            max_steps: self.max_steps,
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            rollout_budget: self.rollout_budget,
            exploration: self.exploration,
            max_tree_depth: self.max_tree_depth,
            rollout_depth: self.rollout_depth,
            rollout_policy: self.rollout_policy,
        }
    }

    pub fn loss(&self) -> LossSpec {
        LossSpec {
            value_weight: self.value_weight,
            policy_weight: self.policy_weight,
            entropy_weight: self.entropy_weight,
            imitation_weight: self.imitation_weight,
            gamma: self.gamma,
            clip_norm: self.clip_norm,
            ..LossSpec::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps, weight_decay: self.weight_decay }
    }

    pub fn trainer(&self, seed: u64) -> TrainerConfig {
        TrainerConfig {
            board: self.board(),
            opponent: self.opponent,
            num_workers: self.num_workers,
            num_demonstrators: self.num_demonstrators,
            t_max: self.t_max,
            search: self.search(),
            loss: self.loss(),
            adam: self.adam(),
            seed,
            stop: StopCondition {
                max_updates: self.max_updates,
                max_model_free_episodes: self.max_model_free_episodes,
                max_wall_clock_s: self.max_wall_clock_s,
            },
            jitter_us: 0,
            record_wall_clock: self.log_wall_clock,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("seeds must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(ConfigError::Invalid("seeds must be distinct".into()));
        }
        if self.curve_bucket == 0 {
            return Err(ConfigError::Invalid("curve_bucket must be at least 1".into()));
        }
        if let Some(s) = self.max_wall_clock_s {
            if !(s > 0.0 && s.is_finite()) {
                return Err(ConfigError::Invalid(format!("max_wall_clock_s must be positive, got {s}")));
            }
        }
        self.trainer(self.seeds[0]).validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn parse_scalar(v: &str) -> toml::Value {
    // wrap in a one-key document so TOML does the literal parsing
    match format!("v = {v}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(v.to_string()),
    }
}
