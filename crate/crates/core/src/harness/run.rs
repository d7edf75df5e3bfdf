//! Training runs over several seeds, their metrics files and learning curves.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.toml                    resolved configuration
//! metrics_seed{S}.jsonl          one EpisodeRecord per line
//! checkpoints/seed{S}_v{V}.bin   periodic snapshots
//! checkpoints/seed{S}_final.bin
//! learning_curve.csv             episode_bucket,mean_reward,std_reward
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use super::config::ExperimentConfig;
use crate::network::{save_checkpoint, NetParams, NetShape};
use crate::seeding;
use crate::trainer::{train, EpisodeOutcome, StoreCounts, WorkerKind};

#[derive(Clone, Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub counts: StoreCounts,
    pub model_free_episodes: u64,
    pub demonstrator_episodes: u64,
    pub aborted_episodes: u64,
    pub elapsed_s: f64,
    /// Model-free episode at which the trailing 200-episode mean first
    /// reached −0.5.
    pub reached_minus_half_at: Option<u64>,
    pub final_checkpoint: PathBuf,
    #[serde(skip)]
    pub model_free_rewards: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    /// Last model-free episode of the bucket.
    pub episode_bucket: u64,
    pub mean_reward: f64,
    pub std_reward: f64,
}

pub fn metrics_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("metrics_seed{seed}.jsonl"))
}

/// Network initialisation seed for a run.
pub fn init_seed(config: &ExperimentConfig, seed: u64) -> u64 {
    seeding::derive_path(config.init_seed, &[seeding::tag("network_init"), seed])
}

/// Trains one seed, streaming records to its metrics file.
pub fn train_seed(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<SeedSummary> {
    let trainer = config.trainer(seed);
    let ckpt_dir = out_dir.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).with_context(|| format!("creating {}", ckpt_dir.display()))?;
    let path = metrics_path(out_dir, seed);
    let mut metrics = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    let mut io_error = None;
    let mut last_checkpoint = 0;
    let mut rewards = Vec::new();
    let init = NetParams::init(NetShape::new(config.board_size), init_seed(config, seed));

    let summary = train(&trainer, init, |record, store| {
        if io_error.is_some() {
            return;
        }
        if record.worker_kind == WorkerKind::ModelFree && record.outcome != EpisodeOutcome::Aborted {
            rewards.push(record.episode_reward);
        }
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        if let Err(e) = metrics.write_all(line.as_bytes()) {
            io_error = Some(e);
            return;
        }
        if config.checkpoint_every > 0 && record.global_version >= last_checkpoint + config.checkpoint_every {
            let (params, version) = store.snapshot();
            let p = ckpt_dir.join(format!("seed{seed}_v{version}.bin"));
            if let Err(e) = save_checkpoint(&p, &params) {
                io_error = Some(e);
            }
            last_checkpoint = version;
        }
    })?;
    if let Some(e) = io_error {
        return Err(e).with_context(|| format!("writing outputs of seed {seed}"));
    }
    metrics.flush()?;
    let final_checkpoint = ckpt_dir.join(format!("seed{seed}_final.bin"));
    save_checkpoint(&final_checkpoint, &summary.params)?;
    Ok(SeedSummary {
        seed,
        counts: summary.counts,
        model_free_episodes: summary.model_free_episodes,
        demonstrator_episodes: summary.demonstrator_episodes,
        aborted_episodes: summary.aborted_episodes,
        elapsed_s: summary.elapsed_s,
        reached_minus_half_at: episodes_to_threshold(&rewards, 200, -0.5),
        final_checkpoint,
        model_free_rewards: rewards,
    })
}

/// Runs every seed of `config` in turn. The configuration is validated
/// before anything is written.
pub fn run_training(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<SeedSummary>> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join("config.toml"), config.to_toml())?;
    let mut summaries = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        summaries.push(train_seed(config, seed, out_dir)?);
    }
    let per_seed: Vec<&[f32]> = summaries.iter().map(|s| s.model_free_rewards.as_slice()).collect();
    write_curve(&out_dir.join("learning_curve.csv"), &learning_curve(&per_seed, config.curve_bucket))?;
    Ok(summaries)
}

/// Mean reward of each seed per bucket of `bucket` model-free episodes,
/// then mean and population standard deviation across seeds. Only buckets
/// completed by every seed are included.
pub fn learning_curve(per_seed: &[&[f32]], bucket: u64) -> Vec<CurveRow> {
    let b = bucket.max(1) as usize;
    let full = per_seed.iter().map(|r| r.len() / b).min().unwrap_or(0);
    (0..full)
        .map(|k| {
            let means: Vec<f64> = per_seed.iter().map(|r| r[k * b..(k + 1) * b].iter().map(|&x| x as f64).sum::<f64>() / b as f64).collect();
            let (mean, std) = mean_std(&means);
            CurveRow { episode_bucket: ((k + 1) * b) as u64, mean_reward: mean, std_reward: std }
        })
        .collect()
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut out = String::from("episode_bucket,mean_reward,std_reward\n");
    for r in rows {
        out += &format!("{},{:.6},{:.6}\n", r.episode_bucket, r.mean_reward, r.std_reward);
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// First 1-based episode count at which the mean of the trailing `window`
/// rewards is at least `threshold`.
pub fn episodes_to_threshold(rewards: &[f32], window: usize, threshold: f64) -> Option<u64> {
    if window == 0 || rewards.len() < window {
        return None;
    }
    // sums of ±1 rewards are exact; the slack only absorbs other inputs
    let reached = |sum: f64| sum / window as f64 >= threshold - 1e-9;
    let mut sum: f64 = rewards[..window].iter().map(|&x| x as f64).sum();
    if reached(sum) {
        return Some(window as u64);
    }
    for i in window..rewards.len() {
        sum += rewards[i] as f64 - rewards[i - window] as f64;
        if reached(sum) {
            return Some(i as u64 + 1);
        }
    }
    None
}
