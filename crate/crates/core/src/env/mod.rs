//! Deterministic two-player Mini-Pommerman.
//!
//! A [`GameState`] is a plain value. [`GameState::step`] returns a fresh
//! state; [`GameState::advance`] mutates in place and is what the tree
//! search uses on its hot path. Both run the same phase sequence:
//!
//! 1. flame decay
//! 2. bomb fuses tick; explosions resolve with chain reactions
//! 3. agent movement and collision resolution (kicks start here)
//! 4. bomb placement
//! 5. kicked bombs slide one cell
//! 6. power-up pickup
//! 7. agents standing in flames die
//! 8. timestep increment and terminal check

mod ascii;
mod dynamics;
mod generate;
pub mod replay;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{blast_cells, Explosion, StepInfo, StepResult};
pub(crate) use dynamics::for_each_blast_cell;
pub use generate::{generate_board, BoardConfig};

/// Largest supported board side.
pub const MAX_SIZE: usize = 12;
pub const MAX_CELLS: usize = MAX_SIZE * MAX_SIZE;
pub const NUM_AGENTS: usize = 2;
pub const NUM_ACTIONS: usize = 6;
/// Steps between bomb placement and explosion.
pub const BOMB_LIFE: u8 = 10;
/// Steps a flame stays on the board.
pub const FLAME_LIFE: u8 = 2;
pub const MAX_EPISODE_LEN: u16 = 800;
pub const INITIAL_AMMO: u8 = 1;
pub const INITIAL_BLAST_RADIUS: u8 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("board size {0} is outside the supported range 6..={MAX_SIZE}")]
    BadSize(usize),
    #[error("action index {0} is not in 0..6")]
    BadAction(usize),
    #[error("cannot step a terminal state")]
    Terminal,
    #[error("board generation failed connectivity after {attempts} attempts (seed {seed})")]
    Disconnected { seed: u64, attempts: u32 },
    #[error("invalid board config: {0}")]
    BadConfig(String),
    #[error("layout error: {0}")]
    Layout(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Passage,
    Rigid,
    Wood,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PowerUp {
    ExtraBomb,
    BlastRadius,
    Kick,
}

impl PowerUp {
    pub const ALL: [PowerUp; 3] = [PowerUp::ExtraBomb, PowerUp::BlastRadius, PowerUp::Kick];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A board cell. A power-up is either lying on a passage (visible) or hidden
/// under wood until the wood burns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub kind: CellKind,
    pub powerup: Option<PowerUp>,
}

impl Cell {
    pub const PASSAGE: Cell = Cell { kind: CellKind::Passage, powerup: None };
    pub const RIGID: Cell = Cell { kind: CellKind::Rigid, powerup: None };
    pub const WOOD: Cell = Cell { kind: CellKind::Wood, powerup: None };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: u8,
    pub col: u8,
}

impl Pos {
    pub const fn new(row: u8, col: u8) -> Self {
        Pos { row, col }
    }

    /// Neighbouring position in `dir`, or `None` when it leaves a `size` board.
    pub fn shifted(self, dir: Direction, size: usize) -> Option<Pos> {
        let (dr, dc) = dir.delta();
        let r = self.row as i32 + dr;
        let c = self.col as i32 + dc;
        if r < 0 || c < 0 || r >= size as i32 || c >= size as i32 {
            None
        } else {
            Some(Pos::new(r as u8, c as u8))
        }
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) as usize + self.col.abs_diff(other.col) as usize
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Down => (1, 0),
            Direction::Left => (0, -1),
            Direction::Right => (0, 1),
        }
    }

    pub fn action(self) -> Action {
        match self {
            Direction::Up => Action::Up,
            Direction::Down => Action::Down,
            Direction::Left => Action::Left,
            Direction::Right => Action::Right,
        }
    }
}

/// The six actions, with a fixed ordinal encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Stop = 4,
    Bomb = 5,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] =
        [Action::Up, Action::Down, Action::Left, Action::Right, Action::Stop, Action::Bomb];

    pub fn from_index(index: usize) -> Result<Action, EnvError> {
        Action::ALL.get(index).copied().ok_or(EnvError::BadAction(index))
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::Up => Some(Direction::Up),
            Action::Down => Some(Direction::Down),
            Action::Left => Some(Direction::Left),
            Action::Right => Some(Direction::Right),
            Action::Stop | Action::Bomb => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Up => "Up",
            Action::Down => "Down",
            Action::Left => "Left",
            Action::Right => "Right",
            Action::Stop => "Stop",
            Action::Bomb => "Bomb",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bomb {
    pub pos: Pos,
    /// Steps until explosion; the bomb explodes when this reaches 0.
    pub fuse: u8,
    pub blast_radius: u8,
    pub owner: usize,
    /// Set while a kicked bomb is sliding.
    pub moving: Option<Direction>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Flame {
    pub pos: Pos,
    pub life: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AgentAttr {
    pub pos: Pos,
    pub alive: bool,
    pub ammo: u8,
    pub blast_radius: u8,
    pub can_kick: bool,
}

impl AgentAttr {
    pub fn new(pos: Pos) -> Self {
        AgentAttr {
            pos,
            alive: true,
            ammo: INITIAL_AMMO,
            blast_radius: INITIAL_BLAST_RADIUS,
            can_kick: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Win(usize),
    Tie,
}

impl Outcome {
    /// Terminal rewards: winner +1 and loser -1; a tie costs both -1.
    pub fn rewards(self) -> [f32; NUM_AGENTS] {
        match self {
            Outcome::Win(0) => [1.0, -1.0],
            Outcome::Win(_) => [-1.0, 1.0],
            Outcome::Tie => [-1.0, -1.0],
        }
    }

    pub fn reward_for(self, agent: usize) -> f32 {
        self.rewards()[agent]
    }
}

/// Full world state. Cells, flames and agents live in fixed-size arrays so
/// that cloning a state is a flat copy plus the (short) bomb list.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GameState {
    size: u8,
    grid: [Cell; MAX_CELLS],
    flames: [u8; MAX_CELLS],
    bombs: Vec<Bomb>,
    agents: [AgentAttr; NUM_AGENTS],
    timestep: u16,
    max_steps: u16,
    seed: u64,
    outcome: Option<Outcome>,
}

impl GameState {
    /// An all-passage board with agents at the given positions. Mostly useful
    /// for building scenarios in tests; see also [`GameState::from_ascii`].
    pub fn empty(size: usize, agent_positions: [Pos; NUM_AGENTS]) -> Result<Self, EnvError> {
        if !(6..=MAX_SIZE).contains(&size) {
            return Err(EnvError::BadSize(size));
        }
        Ok(GameState {
            size: size as u8,
            grid: [Cell::PASSAGE; MAX_CELLS],
            flames: [0; MAX_CELLS],
            bombs: Vec::new(),
            agents: [AgentAttr::new(agent_positions[0]), AgentAttr::new(agent_positions[1])],
            timestep: 0,
            max_steps: MAX_EPISODE_LEN,
            seed: 0,
            outcome: None,
        })
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }

    #[inline]
    pub fn index(&self, pos: Pos) -> usize {
        pos.row as usize * self.size as usize + pos.col as usize
    }

    pub fn pos_of(&self, index: usize) -> Pos {
        Pos::new((index / self.size()) as u8, (index % self.size()) as u8)
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        (0..self.size() * self.size()).map(|i| self.pos_of(i))
    }

    #[inline]
    pub fn cell(&self, pos: Pos) -> Cell {
        self.grid[self.index(pos)]
    }

    pub fn set_cell(&mut self, pos: Pos, cell: Cell) {
        let i = self.index(pos);
        self.grid[i] = cell;
    }

    /// Remaining flame life at `pos`, 0 when there is no flame.
    #[inline]
    pub fn flame_at(&self, pos: Pos) -> u8 {
        self.flames[self.index(pos)]
    }

    pub fn set_flame(&mut self, pos: Pos, life: u8) {
        let i = self.index(pos);
        self.flames[i] = life.min(FLAME_LIFE);
    }

    pub fn flames(&self) -> impl Iterator<Item = Flame> + '_ {
        self.positions().filter_map(move |pos| {
            let life = self.flame_at(pos);
            (life > 0).then_some(Flame { pos, life })
        })
    }

    pub fn bombs(&self) -> &[Bomb] {
        &self.bombs
    }

    pub fn bomb_at(&self, pos: Pos) -> Option<&Bomb> {
        self.bombs.iter().find(|b| b.pos == pos)
    }

    /// Places a bomb directly, bypassing the placement rules. Rejects a second
    /// bomb on an occupied cell.
    pub fn insert_bomb(&mut self, bomb: Bomb) -> Result<(), EnvError> {
        if self.bomb_at(bomb.pos).is_some() {
            return Err(EnvError::Layout(format!("cell {} already holds a bomb", bomb.pos)));
        }
        if bomb.fuse == 0 || bomb.fuse > BOMB_LIFE {
            return Err(EnvError::Layout(format!("bomb fuse {} outside 1..={BOMB_LIFE}", bomb.fuse)));
        }
        self.bombs.push(bomb);
        Ok(())
    }

    pub fn agents(&self) -> &[AgentAttr; NUM_AGENTS] {
        &self.agents
    }

    pub fn agent(&self, id: usize) -> &AgentAttr {
        &self.agents[id]
    }

    pub fn agent_mut(&mut self, id: usize) -> &mut AgentAttr {
        &mut self.agents[id]
    }

    /// Index of a living agent standing on `pos`.
    pub fn agent_at(&self, pos: Pos) -> Option<usize> {
        self.agents.iter().position(|a| a.alive && a.pos == pos)
    }

    pub fn timestep(&self) -> u16 {
        self.timestep
    }

    pub fn max_steps(&self) -> u16 {
        self.max_steps
    }

    /// Shortens (or restores) the episode cap. Values above the standard
    /// 800-step cap are clamped.
    pub fn set_max_steps(&mut self, max_steps: u16) {
        self.max_steps = max_steps.clamp(1, MAX_EPISODE_LEN);
    }

    /// Board-generation seed this state descends from (0 for hand-built states).
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome.is_some()
    }

    #[inline]
    pub fn in_bounds(&self, row: i32, col: i32) -> bool {
        row >= 0 && col >= 0 && row < self.size as i32 && col < self.size as i32
    }

    pub fn count_kind(&self, kind: CellKind) -> usize {
        self.positions().filter(|&p| self.cell(p).kind == kind).count()
    }
}

impl fmt::Debug for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "GameState {{ t: {}/{}, seed: {}, outcome: {:?}, agents: {:?}, bombs: {:?} }}",
            self.timestep, self.max_steps, self.seed, self.outcome, self.agents, self.bombs
        )?;
        f.write_str(&self.render())
    }
}
