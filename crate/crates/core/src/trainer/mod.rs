//! Asynchronous advantage actor-critic with optional demonstrator workers.
//!
//! Each worker owns an environment and an rng. It pulls the latest global
//! parameters, plays up to `t_max` steps, computes the loss gradient on that
//! snapshot and submits it to the [`GlobalStore`], whose Adam step is
//! serialized. Demonstrator workers act with the tree search and add the
//! planner imitation term; model-free workers sample from the policy head.
//! Gradients may be stale by any number of versions.

mod store;
mod worker;

use std::sync::atomic::{AtomicBool, AtomicU64};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{GlobalStore, Rejected, StoreCounts};
pub use worker::{collect_segment, episode_seed, worker_rng_seed, Segment, LEARNER, OPPONENT};

use crate::env::{BoardConfig, Outcome};
use crate::loss::{LossComponents, LossSpec};
use crate::mcts::SearchConfig;
use crate::network::{AdamConfig, NetParams, NetShape};
use crate::opponents::OpponentKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkerKind {
    ModelFree,
    Demonstrator,
}

/// Training ends as soon as any limit is reached.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StopCondition {
    pub max_updates: Option<u64>,
    pub max_model_free_episodes: Option<u64>,
    pub max_wall_clock_s: Option<f64>,
}

impl StopCondition {
    pub fn is_bounded(&self) -> bool {
        self.max_updates.is_some() || self.max_model_free_episodes.is_some() || self.max_wall_clock_s.is_some()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub board: BoardConfig,
    pub opponent: OpponentKind,
    pub num_workers: usize,
    /// Workers `0..num_demonstrators` act with the tree search.
    pub num_demonstrators: usize,
    pub t_max: usize,
    pub search: SearchConfig,
    pub loss: LossSpec,
    pub adam: AdamConfig,
    pub seed: u64,
    pub stop: StopCondition,
    /// Upper bound of a random sleep before and after each submission.
    pub jitter_us: u64,
    /// Write elapsed time into episode records (makes them run-dependent).
    pub record_wall_clock: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            board: BoardConfig::new(8),
            opponent: OpponentKind::Static,
            num_workers: 24,
            num_demonstrators: 1,
            t_max: 20,
            search: SearchConfig::default(),
            loss: LossSpec::default(),
            adam: AdamConfig::default(),
            seed: 0,
            stop: StopCondition::default(),
            jitter_us: 0,
            record_wall_clock: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainerError {
    #[error("invalid trainer config: {0}")]
    Config(String),
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |m: String| Err(TrainerError::Config(m));
        self.board.validate().map_err(|e| TrainerError::Config(e.to_string()))?;
        self.loss.validate().map_err(TrainerError::Config)?;
        if self.num_workers == 0 {
            return bad("num_workers must be at least 1".into());
        }
        if self.num_demonstrators >= self.num_workers {
            return bad(format!(
                "num_demonstrators ({}) must be below num_workers ({})",
                self.num_demonstrators, self.num_workers
            ));
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1".into());
        }
        if self.num_demonstrators > 0 && self.search.rollout_budget == 0 {
            return bad("rollout_budget must be at least 1".into());
        }
        if !self.stop.is_bounded() {
            return bad("no stop condition: set max_updates, max_model_free_episodes or max_wall_clock_s".into());
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.eps > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.weight_decay >= 0.0) {
            return bad(format!("invalid Adam settings {a:?}"));
        }
        Ok(())
    }

    pub fn kind_of(&self, worker_id: usize) -> WorkerKind {
        if worker_id < self.num_demonstrators {
            WorkerKind::Demonstrator
        } else {
            WorkerKind::ModelFree
        }
    }
}

/// Episode result from the learner's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeOutcome {
    Win,
    Loss,
    Tie,
    Aborted,
}

impl EpisodeOutcome {
    pub fn of(outcome: Outcome, agent: usize) -> Self {
        match outcome {
            Outcome::Win(w) if w == agent => EpisodeOutcome::Win,
            Outcome::Win(_) => EpisodeOutcome::Loss,
            Outcome::Tie => EpisodeOutcome::Tie,
        }
    }
}

/// One line of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_s: Option<f64>,
    pub global_version: u64,
    pub worker_id: usize,
    pub worker_kind: WorkerKind,
    /// Per-worker episode counter.
    pub episode: u64,
    /// Position among all model-free episodes of the run (1-based).
    pub model_free_episode: Option<u64>,
    pub board_seed: u64,
    pub episode_reward: f32,
    pub episode_length: u32,
    pub outcome: EpisodeOutcome,
    /// Mean of the loss components over the episode's updates.
    pub loss: LossComponents,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct TrainingSummary {
    pub params: NetParams<f32>,
    pub counts: StoreCounts,
    pub model_free_episodes: u64,
    pub demonstrator_episodes: u64,
    pub aborted_episodes: u64,
    /// Gradients applied from each worker, as counted by the worker.
    pub applied_per_worker: Vec<u64>,
    pub elapsed_s: f64,
}

/// Trains from `init` until a stop condition holds. `on_record` runs on the
/// calling thread for every finished episode, in arrival order, and may read
/// the store (e.g. to write checkpoints).
pub fn train(
    config: &TrainerConfig,
    init: NetParams<f32>,
    mut on_record: impl FnMut(&EpisodeRecord, &GlobalStore),
) -> Result<TrainingSummary, TrainerError> {
    config.validate()?;
    if init.shape() != NetShape::new(config.board.size) {
        return Err(TrainerError::Config(format!(
            "network built for {}x{} boards, config uses {}",
            init.shape().board_size,
            init.shape().board_size,
            config.board.size
        )));
    }
    let store = GlobalStore::new(init, config.adam, config.stop.max_updates);
    let stop = AtomicBool::new(false);
    let model_free = AtomicU64::new(0);
    let shared = worker::Shared { store: &store, stop: &stop, model_free_episodes: &model_free, start: Instant::now() };
    let (tx, rx) = mpsc::channel();
    let (mut mf, mut demo, mut aborted) = (0, 0, 0);

    let applied_per_worker = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.num_workers)
            .map(|id| {
                let tx = tx.clone();
                let shared = &shared;
                let kind = config.kind_of(id);
                std::thread::Builder::new()
                    .name(format!("worker-{id}"))
                    .spawn_scoped(scope, move || worker::run(id, kind, config, shared, tx))
                    .expect("spawn worker thread")
            })
            .collect();
        drop(tx);
        for record in rx {
            match (record.outcome, record.worker_kind) {
                (EpisodeOutcome::Aborted, _) => aborted += 1,
                (_, WorkerKind::ModelFree) => mf += 1,
                (_, WorkerKind::Demonstrator) => demo += 1,
            }
            on_record(&record, &store);
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    Ok(TrainingSummary {
        params: store.params(),
        counts: store.counts(),
        model_free_episodes: mf,
        demonstrator_episodes: demo,
        aborted_episodes: aborted,
        applied_per_worker,
        elapsed_s: shared.start.elapsed().as_secs_f64(),
    })
}
