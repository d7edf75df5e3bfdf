//! Evaluation tournaments.
//!
//! Game `i` of a tournament with master seed `s` uses board seed
//! `derive_path(s, [tag("eval_board"), i])` and action rng
//! `derive_path(s, [tag("eval_rng"), i])`, so results do not depend on how
//! games are scheduled across threads.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::replay::Replay;
use crate::env::{generate_board, Action, BoardConfig};
use crate::features::encode;
use crate::mcts::{sample_policy, search, RolloutPolicy, SearchConfig};
use crate::network::{load_checkpoint, CheckpointError, NetParams, NetShape};
use crate::opponents::OpponentKind;
use crate::seeding;
use crate::trainer::{EpisodeOutcome, LEARNER, OPPONENT};

#[derive(Clone, Debug, PartialEq)]
pub enum AgentSpec {
    VanillaMcts { budget: u32, rollout_policy: RolloutPolicy },
    /// Samples from the policy head of a saved network.
    Checkpoint(PathBuf),
    RuleBased,
    Static,
}

impl std::str::FromStr for AgentSpec {
    type Err = String;

    /// `mcts75`, `mcts:150`, `static`, `rule_based`, `checkpoint:PATH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("checkpoint:") {
            return Ok(AgentSpec::Checkpoint(PathBuf::from(path)));
        }
        if let Some(rest) = s.strip_prefix("mcts") {
            let budget: u32 = rest.trim_start_matches(':').parse().map_err(|_| format!("bad rollout budget in {s:?}"))?;
            if budget == 0 {
                return Err("rollout budget must be at least 1".into());
            }
            return Ok(AgentSpec::VanillaMcts { budget, rollout_policy: RolloutPolicy::UniformRandom });
        }
        match s.parse::<OpponentKind>()? {
            OpponentKind::Static => Ok(AgentSpec::Static),
            OpponentKind::RuleBased => Ok(AgentSpec::RuleBased),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("games must be at least 1")]
    NoGames,
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: String, source: CheckpointError },
    #[error("game {game}: {msg}")]
    Game { game: u64, msg: String },
    #[error(transparent)]
    Board(#[from] crate::env::EnvError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub games: u64,
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub mean_reward: f64,
}

impl EvalReport {
    /// Win +1, loss −1 and tie −1, averaged.
    pub fn from_counts(wins: u64, losses: u64, ties: u64) -> Self {
        let games = wins + losses + ties;
        let mean_reward = (wins as f64 - losses as f64 - ties as f64) / games as f64;
        EvalReport { games, wins, losses, ties, mean_reward }
    }

    pub fn win_rate(&self) -> f64 {
        self.wins as f64 / self.games as f64
    }

    pub fn loss_rate(&self) -> f64 {
        self.losses as f64 / self.games as f64
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "games {} wins {} losses {} ties {} mean_reward {:.4}",
            self.games, self.wins, self.losses, self.ties, self.mean_reward
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub game: u64,
    pub board_seed: u64,
    pub outcome: EpisodeOutcome,
    pub reward: f32,
    pub length: u32,
    #[serde(skip)]
    pub replay: Option<Replay>,
}

enum Actor {
    Mcts(SearchConfig),
    Net(NetParams<f32>),
    Scripted(OpponentKind),
}

impl Actor {
    fn new(spec: &AgentSpec, board: &BoardConfig) -> Result<Actor, EvalError> {
        Ok(match spec {
            AgentSpec::VanillaMcts { budget, rollout_policy } => {
                if *rollout_policy == RolloutPolicy::PolicyHead {
                    return Err(EvalError::Game { game: 0, msg: "vanilla search has no network for policy-head rollouts".into() });
                }
                Actor::Mcts(SearchConfig::with_budget(*budget))
            }
            AgentSpec::Checkpoint(path) => {
                let params = load_checkpoint(path, Some(NetShape::new(board.size)))
                    .map_err(|source| EvalError::Checkpoint { path: path.display().to_string(), source })?;
                Actor::Net(params)
            }
            AgentSpec::RuleBased => Actor::Scripted(OpponentKind::RuleBased),
            AgentSpec::Static => Actor::Scripted(OpponentKind::Static),
        })
    }

    fn act(&self, state: &crate::env::GameState, rng: &mut impl Rng) -> Result<Action, String> {
        match self {
            Actor::Mcts(cfg) => Ok(search(state, LEARNER, cfg, None, rng).map_err(|e| e.to_string())?.action),
            Actor::Net(p) => Ok(sample_policy(&p.predict(&encode(state, LEARNER)).map_err(|e| e.to_string())?.policy, rng)),
            Actor::Scripted(k) => Ok(k.act(state, LEARNER, rng)),
        }
    }
}

pub fn eval_board_seed(master: u64, game: u64) -> u64 {
    seeding::derive_path(master, &[seeding::tag("eval_board"), game])
}

fn play(actor: &Actor, opponent: OpponentKind, board: &BoardConfig, master: u64, game: u64, keep_replay: bool) -> Result<GameRecord, EvalError> {
    let board_seed = eval_board_seed(master, game);
    let mut rng = seeding::rng(seeding::derive_path(master, &[seeding::tag("eval_rng"), game]));
    let mut state = generate_board(board_seed, board)?;
    let mut replay = keep_replay.then(|| Replay::new(board.clone(), board_seed));
    let err = |msg: String| EvalError::Game { game, msg };
    loop {
        let mut actions = [Action::Stop; 2];
        actions[LEARNER] = actor.act(&state, &mut rng).map_err(err)?;
        actions[OPPONENT] = opponent.act(&state, OPPONENT, &mut rng);
        let info = state.advance(actions).map_err(|e| err(e.to_string()))?;
        if let Some(r) = replay.as_mut() {
            r.push(actions);
        }
        if let Some(outcome) = info.outcome {
            return Ok(GameRecord {
                game,
                board_seed,
                outcome: EpisodeOutcome::of(outcome, LEARNER),
                reward: info.rewards[LEARNER],
                length: state.timestep() as u32,
                replay,
            });
        }
    }
}

/// Plays `games` fresh-board games of `agent` (as agent 0) against
/// `opponent`. Deterministic given `seed`.
pub fn run_eval(
    agent: &AgentSpec,
    opponent: OpponentKind,
    games: u64,
    seed: u64,
    board: &BoardConfig,
    keep_replays: bool,
) -> Result<(EvalReport, Vec<GameRecord>), EvalError> {
    if games == 0 {
        return Err(EvalError::NoGames);
    }
    board.validate()?;
    let actor = Actor::new(agent, board)?;
    let records = (0..games)
        .into_par_iter()
        .map(|g| play(&actor, opponent, board, seed, g, keep_replays))
        .collect::<Result<Vec<_>, _>>()?;
    let count = |o| records.iter().filter(|r| r.outcome == o).count() as u64;
    let report = EvalReport::from_counts(count(EpisodeOutcome::Win), count(EpisodeOutcome::Loss), count(EpisodeOutcome::Tie));
    Ok((report, records))
}

/// Writes `eval_summary.json` (one line), `eval_games.jsonl` and, when
/// present, one replay file per game under `replays/`.
pub fn write_eval(out_dir: &Path, report: &EvalReport, records: &[GameRecord]) -> std::io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("eval_summary.json"), serde_json::to_string(report)? + "\n")?;
    let mut lines = String::new();
    for r in records {
        lines += &serde_json::to_string(r)?;
        lines.push('\n');
    }
    std::fs::write(out_dir.join("eval_games.jsonl"), lines)?;
    if records.iter().any(|r| r.replay.is_some()) {
        let dir = out_dir.join("replays");
        std::fs::create_dir_all(&dir)?;
        for r in records {
            if let Some(replay) = &r.replay {
                std::fs::write(dir.join(format!("game_{:04}.txt", r.game)), replay.to_text())?;
            }
        }
    }
    Ok(())
}
