//! One actor-learner: a private environment, a snapshot of the global
//! network, and the segment/update loop.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::Sender;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::store::{GlobalStore, Rejected};
use super::{EpisodeOutcome, EpisodeRecord, TrainerConfig, WorkerKind};
use crate::env::{generate_board, Action, GameState, Outcome};
use crate::features::encode;
use crate::loss::{Composition, LossComponents, Step, Trajectory};
use crate::mcts::{sample_policy, search};
use crate::network::{loss_and_grad, NetParams};
use crate::seeding;

/// The learner always plays agent 0; boards are symmetric about the main
/// diagonal, so the side carries no advantage.
pub const LEARNER: usize = 0;
pub const OPPONENT: usize = 1;

/// Counters shared by all workers of one run.
pub(super) struct Shared<'a> {
    pub store: &'a GlobalStore,
    pub stop: &'a AtomicBool,
    pub model_free_episodes: &'a AtomicU64,
    pub start: Instant,
}

impl Shared<'_> {
    fn should_stop(&self, config: &TrainerConfig) -> bool {
        if self.stop.load(Ordering::Relaxed) || self.store.closed() {
            return true;
        }
        if config.stop.max_wall_clock_s.is_some_and(|s| self.start.elapsed().as_secs_f64() >= s) {
            self.stop.store(true, Ordering::Relaxed);
            return true;
        }
        false
    }
}

/// Board seed of a worker's `episode`-th game.
pub fn episode_seed(master: u64, worker_id: usize, episode: u64) -> u64 {
    seeding::derive_path(master, &[seeding::tag("episode"), worker_id as u64, episode])
}

pub fn worker_rng_seed(master: u64, worker_id: usize) -> u64 {
    seeding::derive_path(master, &[seeding::tag("worker"), worker_id as u64])
}

struct Episode {
    state: GameState,
    index: u64,
    seed: u64,
    reward: f32,
    length: u32,
    loss_sum: LossComponents,
    updates: u32,
}

impl Episode {
    fn start(config: &TrainerConfig, worker_id: usize, index: u64) -> Result<Episode, String> {
        let seed = episode_seed(config.seed, worker_id, index);
        let state = generate_board(seed, &config.board).map_err(|e| e.to_string())?;
        Ok(Episode { state, index, seed, reward: 0.0, length: 0, loss_sum: LossComponents::default(), updates: 0 })
    }

    fn add_loss(&mut self, c: &LossComponents) {
        let s = &mut self.loss_sum;
        s.policy += c.policy;
        s.value += c.value;
        s.entropy += c.entropy;
        s.total += c.total;
        s.clamped |= c.clamped;
        if let Some(i) = c.imitation {
            s.imitation = Some(s.imitation.unwrap_or(0.0) + i);
        }
        self.updates += 1;
    }

    fn mean_loss(&self) -> LossComponents {
        let n = self.updates.max(1) as f64;
        let s = &self.loss_sum;
        LossComponents {
            policy: s.policy / n,
            value: s.value / n,
            entropy: s.entropy / n,
            imitation: s.imitation.map(|i| i / n),
            total: s.total / n,
            clamped: s.clamped,
        }
    }
}

/// One update segment and, if the game ended inside it, the outcome.
#[derive(Clone, Debug)]
pub struct Segment {
    pub traj: Trajectory,
    pub outcome: Option<Outcome>,
}

/// Plays up to `config.t_max` steps from `state` with `params` as the
/// acting snapshot. Demonstrators act with the tree search and record the
/// policy head alongside; model-free workers sample from the policy head.
pub fn collect_segment(
    config: &TrainerConfig,
    kind: WorkerKind,
    params: &NetParams<f32>,
    state: &mut GameState,
    rng: &mut ChaCha8Rng,
) -> Result<Segment, String> {
    let mut steps = Vec::with_capacity(config.t_max);
    let mut planner = Vec::with_capacity(config.t_max);
    let mut outcome = None;
    while steps.len() < config.t_max {
        let features = encode(state, LEARNER);
        let out = params.predict(&features).map_err(|e| e.to_string())?;
        let action = match kind {
            WorkerKind::ModelFree => sample_policy(&out.policy, rng),
            WorkerKind::Demonstrator => {
                let a = search(state, LEARNER, &config.search, Some(params), rng).map_err(|e| e.to_string())?.action;
                planner.push(a);
                a
            }
        };
        let opp = config.opponent.act(state, OPPONENT, rng);
        let info = state.advance(ordered(action, opp)).map_err(|e| e.to_string())?;
        steps.push(Step { features, action, reward: info.rewards[LEARNER], value: out.value, policy: out.policy });
        if info.terminal {
            outcome = info.outcome;
            break;
        }
    }
    let terminal = outcome.is_some();
    let bootstrap = if terminal {
        0.0
    } else {
        params.predict(&encode(state, LEARNER)).map_err(|e| e.to_string())?.value
    };
    let planner_actions = (kind == WorkerKind::Demonstrator).then_some(planner);
    Ok(Segment { traj: Trajectory { steps, bootstrap, terminal, planner_actions }, outcome })
}

fn ordered(learner: Action, opponent: Action) -> [Action; 2] {
    let mut a = [Action::Stop; 2];
    a[LEARNER] = learner;
    a[OPPONENT] = opponent;
    a
}

fn jitter(config: &TrainerConfig, rng: &mut ChaCha8Rng) {
    if config.jitter_us > 0 {
        let us = rng.gen_range(0..=config.jitter_us);
        if us == 0 {
            std::thread::yield_now();
        } else {
            std::thread::sleep(Duration::from_micros(us));
        }
    }
}

/// Runs until a stop condition holds. Episodes are reported on `tx` as they
/// finish; a failed episode is reported as aborted and the worker moves on.
/// Returns the number of this worker's gradients the store applied.
pub(super) fn run(worker_id: usize, kind: WorkerKind, config: &TrainerConfig, shared: &Shared<'_>, tx: Sender<EpisodeRecord>) -> u64 {
    let mut rng = seeding::rng(worker_rng_seed(config.seed, worker_id));
    let composition = match kind {
        WorkerKind::ModelFree => Composition::A3c,
        WorkerKind::Demonstrator => Composition::PiA3c,
    };
    let spec = config.loss.with_composition(composition);
    // jitter draws come from their own stream so that enabling it does not
    // change the actions taken
    let mut jitter_rng = seeding::rng(seeding::derive(worker_rng_seed(config.seed, worker_id), seeding::tag("jitter")));
    let mut next_index = 0;
    let mut episode: Option<Episode> = None;
    let mut applied = 0;

    while !shared.should_stop(config) {
        let mut ep = match episode.take() {
            Some(ep) => ep,
            None => {
                next_index += 1;
                match Episode::start(config, worker_id, next_index - 1) {
                    Ok(ep) => ep,
                    Err(e) => {
                        report_aborted(worker_id, kind, next_index - 1, 0, shared, &tx, e);
                        continue;
                    }
                }
            }
        };
        let (params, _) = shared.store.snapshot();
        let segment = match collect_segment(config, kind, &params, &mut ep.state, &mut rng) {
            Ok(s) => {
                ep.reward += s.traj.steps.iter().map(|x| x.reward).sum::<f32>();
                ep.length += s.traj.len() as u32;
                s
            }
            Err(e) => {
                report_aborted(worker_id, kind, ep.index, ep.seed, shared, &tx, e);
                continue;
            }
        };
        jitter(config, &mut jitter_rng);
        let version = match loss_and_grad(&params, &segment.traj, &spec) {
            Ok((report, grads)) => {
                ep.add_loss(&report.components);
                match shared.store.apply_gradients(&grads) {
                    Ok(v) => {
                        applied += 1;
                        v
                    }
                    Err(Rejected::NonFinite) => shared.store.version(),
                    Err(Rejected::Closed) => break,
                }
            }
            Err(_) => {
                shared.store.reject();
                shared.store.version()
            }
        };
        jitter(config, &mut jitter_rng);
        match segment.outcome {
            Some(outcome) => finish(worker_id, kind, ep, outcome, version, config, shared, &tx),
            None => episode = Some(ep),
        }
    }
    applied
}

#[allow(clippy::too_many_arguments)]
fn finish(
    worker_id: usize,
    kind: WorkerKind,
    ep: Episode,
    outcome: Outcome,
    version: u64,
    config: &TrainerConfig,
    shared: &Shared<'_>,
    tx: &Sender<EpisodeRecord>,
) {
    let model_free_index = match kind {
        WorkerKind::ModelFree => {
            let n = shared.model_free_episodes.fetch_add(1, Ordering::SeqCst) + 1;
            if let Some(max) = config.stop.max_model_free_episodes {
                if n >= max {
                    shared.stop.store(true, Ordering::Relaxed);
                }
                if n > max {
                    return;
                }
            }
            Some(n)
        }
        WorkerKind::Demonstrator => None,
    };
    let record = EpisodeRecord {
        wall_clock_s: config.record_wall_clock.then(|| shared.start.elapsed().as_secs_f64()),
        global_version: version,
        worker_id,
        worker_kind: kind,
        episode: ep.index,
        model_free_episode: model_free_index,
        board_seed: ep.seed,
        episode_reward: ep.reward,
        episode_length: ep.length,
        outcome: EpisodeOutcome::of(outcome, LEARNER),
        loss: ep.mean_loss(),
        error: None,
    };
    let _ = tx.send(record);
}

fn report_aborted(
    worker_id: usize,
    kind: WorkerKind,
    episode: u64,
    board_seed: u64,
    shared: &Shared<'_>,
    tx: &Sender<EpisodeRecord>,
    error: String,
) {
    let record = EpisodeRecord {
        wall_clock_s: None,
        global_version: shared.store.version(),
        worker_id,
        worker_kind: kind,
        episode,
        model_free_episode: None,
        board_seed,
        episode_reward: 0.0,
        episode_length: 0,
        outcome: EpisodeOutcome::Aborted,
        loss: LossComponents::default(),
        error: Some(error),
    };
    let _ = tx.send(record);
}
