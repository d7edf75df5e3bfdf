//! Line-oriented episode records.
//!
//! ```text
//! pia3c-replay 1
//! board size=8 rigid=0.2 wood=0.3 powerup=0.5 max_steps=800
//! seed 42
//! 5 4
//! 1 4
//! ```
//!
//! Each line after `seed` is one step: the action ordinals of agent 0 and
//! agent 1. Generation is deterministic, so the seed and the action pairs are
//! enough to rebuild every intermediate state.

use std::fmt::Write as _;

use thiserror::Error;

use super::{generate_board, Action, BoardConfig, EnvError, GameState, NUM_AGENTS};

const MAGIC: &str = "pia3c-replay 1";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Replay {
    pub board: BoardConfig,
    pub seed: u64,
    pub steps: Vec<[Action; NUM_AGENTS]>,
}

impl Replay {
    pub fn new(board: BoardConfig, seed: u64) -> Self {
        Replay { board, seed, steps: Vec::new() }
    }

    pub fn push(&mut self, actions: [Action; NUM_AGENTS]) {
        self.steps.push(actions);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let b = &self.board;
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(
            out,
            "board size={} rigid={} wood={} powerup={} max_steps={}",
            b.size, b.rigid_fraction, b.wood_fraction, b.powerup_fraction, b.max_steps
        )
        .unwrap();
        writeln!(out, "seed {}", self.seed).unwrap();
        for [a, b] in &self.steps {
            writeln!(out, "{} {}", a.index(), b.index()).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Replay, ReplayError> {
        let err = |line: usize, msg: String| ReplayError::Parse { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());

        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            Some((n, l)) => return Err(err(n, format!("expected {MAGIC:?}, got {l:?}"))),
            None => return Err(err(0, "empty replay".into())),
        }

        let (n, board_line) = lines.next().ok_or_else(|| err(0, "missing board line".into()))?;
        let mut board = BoardConfig::default();
        let mut fields = board_line.split_whitespace();
        if fields.next() != Some("board") {
            return Err(err(n, "expected board line".into()));
        }
        for kv in fields {
            let (k, v) = kv.split_once('=').ok_or_else(|| err(n, format!("bad field {kv:?}")))?;
            let bad = |_| err(n, format!("bad value for {k}: {v:?}"));
            match k {
                "size" => board.size = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                "rigid" => board.rigid_fraction = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "wood" => board.wood_fraction = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?,
                "powerup" => {
                    board.powerup_fraction = v.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                }
                "max_steps" => board.max_steps = v.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
                _ => return Err(err(n, format!("unknown board field {k:?}"))),
            }
        }

        let (n, seed_line) = lines.next().ok_or_else(|| err(0, "missing seed line".into()))?;
        let seed = seed_line
            .strip_prefix("seed ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(n, format!("bad seed line {seed_line:?}")))?;

        let mut steps = Vec::new();
        for (n, l) in lines {
            let mut parts = l.split_whitespace().map(|p| p.parse::<usize>());
            let (Some(Ok(a)), Some(Ok(b)), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(n, format!("bad step line {l:?}")));
            };
            steps.push([Action::from_index(a)?, Action::from_index(b)?]);
        }
        Ok(Replay { board, seed, steps })
    }

    /// Re-derives every state of the episode, starting with the initial board.
    pub fn states(&self) -> Result<Vec<GameState>, ReplayError> {
        let mut state = generate_board(self.seed, &self.board)?;
        let mut trace = Vec::with_capacity(self.steps.len() + 1);
        trace.push(state.clone());
        for &actions in &self.steps {
            state.advance(actions)?;
            trace.push(state.clone());
        }
        Ok(trace)
    }
}
