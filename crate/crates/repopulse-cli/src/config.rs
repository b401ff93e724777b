//! Run configuration shared by every command.
//!
//! Precedence is defaults < config file < command-line flags. The file is
//! flat TOML with a closed schema: unknown keys are rejected so a typo in a
//! hyperparameter name fails loudly instead of silently running defaults.

use clap::ValueEnum;
use repopulse::ingest::EventType;
use repopulse::lstm::{SweepConfig, TrainConfig};
use repopulse::pipeline::{ArimaRunConfig, LstmRunConfig};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Which popularity signal a run counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EventChoice {
    Fork,
    Watch,
}

impl EventChoice {
    pub fn keep_set(self) -> HashSet<EventType> {
        let t = match self {
            EventChoice::Fork => EventType::Fork,
            EventChoice::Watch => EventType::Watch,
        };
        [t].into_iter().collect()
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("invalid config `{path}`: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One run's complete settings. Every field has a default, so a config file
/// may set any subset of keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Line-delimited event stream consumed by `ingest` and `segment`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
    /// `repo_id,topic` CSV consumed by `segment`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topics: Option<PathBuf>,
    /// Optional `user_id,community_id` CSV overriding the default
    /// component-based communities in `segment`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub communities: Option<PathBuf>,
    /// Directory that receives every artifact.
    pub out_dir: PathBuf,
    pub event_type: EventChoice,
    /// Length of one counting window in days; at least 1.
    pub window_days: u32,
    /// How many of the busiest repositories to track; at least 1.
    pub top_k: usize,
    /// Past windows fed to the sequence model per prediction; at least 1.
    pub loopback: usize,
    /// Fraction of samples used for training, strictly between 0 and 1.
    pub split_ratio: f64,
    pub seed: u64,
    /// Units per stacked recurrent layer; non-empty, all positive.
    pub hidden_sizes: Vec<usize>,
    /// Adam step size; finite and positive.
    pub learning_rate: f64,
    /// Upper bound on training epochs; at least 1.
    pub max_epochs: usize,
    /// Epochs without meaningful validation improvement before stopping.
    pub patience: usize,
    /// Relative improvement below this counts as no change; finite, >= 0.
    pub improvement_epsilon: f64,
    /// Mini-batch size; 0 trains full-batch.
    pub batch_size: usize,
    /// Order-search bounds; p and q at most 8, d at most 3.
    pub p_max: usize,
    pub d_max: usize,
    pub q_max: usize,
    /// Candidate loop-back lengths for `sweep`; non-empty, all positive.
    pub sweep_loopbacks: Vec<usize>,
    /// Target segment count for the community ensemble; at least 1.
    pub segments: usize,
    /// Cluster count for user k-means; at least 1.
    pub clusters: usize,
    pub kmeans_batch: usize,
    pub kmeans_iters: usize,
    /// Synthetic benchmark shape: repositories, windows, and coupled groups.
    pub bench_repos: usize,
    pub bench_windows: usize,
    pub bench_groups: usize,
    /// Strength of the shared latent driver in the benchmark generator;
    /// finite, >= 0. Zero decouples the series.
    pub bench_coupling: f64,
    /// How many consecutive seeds the benchmark runs, starting at `seed`.
    pub bench_seeds: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            events: None,
            topics: None,
            communities: None,
            out_dir: PathBuf::from("repopulse_out"),
            event_type: EventChoice::Watch,
            window_days: 10,
            top_k: 100,
            loopback: 8,
            split_ratio: 0.8,
            seed: 42,
            hidden_sizes: vec![16, 16],
            learning_rate: 0.01,
            max_epochs: 1000,
            patience: 100,
            improvement_epsilon: 1e-6,
            batch_size: 16,
            p_max: 5,
            d_max: 2,
            q_max: 5,
            sweep_loopbacks: vec![2, 4, 6, 8, 10, 12],
            segments: 4,
            clusters: 4,
            kmeans_batch: 32,
            kmeans_iters: 200,
            bench_repos: 10,
            bench_windows: 120,
            bench_groups: 1,
            bench_coupling: 0.8,
            bench_seeds: 5,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub events: Option<PathBuf>,
    pub event_type: Option<EventChoice>,
    pub window_days: Option<u32>,
    pub top_k: Option<usize>,
    pub loopback: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml(path, &text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(v) = &o.events {
            self.events = Some(v.clone());
        }
        if let Some(v) = o.event_type {
            self.event_type = v;
        }
        if let Some(v) = o.window_days {
            self.window_days = v;
        }
        if let Some(v) = o.top_k {
            self.top_k = v;
        }
        if let Some(v) = o.loopback {
            self.loopback = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.window_days == 0 {
            return fail("window_days must be at least 1".into());
        }
        if self.top_k == 0 {
            return fail("top_k must be at least 1".into());
        }
        if self.loopback == 0 {
            return fail("loopback must be at least 1".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail(format!("split_ratio must be in (0, 1), got {}", self.split_ratio));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return fail("hidden_sizes must be non-empty with positive entries".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail(format!("learning_rate must be finite and positive, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return fail("patience must be at least 1".into());
        }
        if !(self.improvement_epsilon.is_finite() && self.improvement_epsilon >= 0.0) {
            return fail(format!(
                "improvement_epsilon must be finite and non-negative, got {}",
                self.improvement_epsilon
            ));
        }
        if self.p_max > 8 || self.q_max > 8 {
            return fail(format!("p_max and q_max are capped at 8, got ({}, {})", self.p_max, self.q_max));
        }
        if self.d_max > 3 {
            return fail(format!("d_max is capped at 3, got {}", self.d_max));
        }
        if self.sweep_loopbacks.is_empty() || self.sweep_loopbacks.contains(&0) {
            return fail("sweep_loopbacks must be non-empty with positive entries".into());
        }
        if self.segments == 0 {
            return fail("segments must be at least 1".into());
        }
        if self.clusters == 0 {
            return fail("clusters must be at least 1".into());
        }
        if self.kmeans_batch == 0 || self.kmeans_iters == 0 {
            return fail("kmeans_batch and kmeans_iters must be at least 1".into());
        }
        if self.bench_repos < 2 {
            return fail(format!("bench_repos must be at least 2, got {}", self.bench_repos));
        }
        if self.bench_windows < 3 {
            return fail(format!("bench_windows must be at least 3, got {}", self.bench_windows));
        }
        if self.bench_groups == 0 || self.bench_groups > self.bench_repos {
            return fail(format!(
                "bench_groups must be in [1, bench_repos], got {} with {} repos",
                self.bench_groups, self.bench_repos
            ));
        }
        if !(self.bench_coupling.is_finite() && self.bench_coupling >= 0.0) {
            return fail(format!("bench_coupling must be finite and non-negative, got {}", self.bench_coupling));
        }
        if self.bench_seeds == 0 {
            return fail("bench_seeds must be at least 1".into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            improvement_epsilon: self.improvement_epsilon,
            batch_size: if self.batch_size == 0 { None } else { Some(self.batch_size) },
        }
    }

    pub fn lstm_run_config(&self) -> LstmRunConfig {
        LstmRunConfig {
            hidden_sizes: self.hidden_sizes.clone(),
            loopback: self.loopback,
            split_ratio: self.split_ratio,
            seed: self.seed,
            train: self.train_config(),
        }
    }

    pub fn arima_run_config(&self) -> ArimaRunConfig {
        ArimaRunConfig {
            p_max: self.p_max,
            d_max: self.d_max,
            q_max: self.q_max,
            loopback: self.loopback,
            split_ratio: self.split_ratio,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            l_values: self.sweep_loopbacks.clone(),
            hidden_sizes: self.hidden_sizes.clone(),
            split_ratio: self.split_ratio,
            seed: self.seed,
            train: self.train_config(),
        }
    }
}
