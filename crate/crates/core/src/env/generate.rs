use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentAttr, Cell, CellKind, EnvError, GameState, Pos, PowerUp, MAX_EPISODE_LEN, MAX_SIZE};
use crate::seeding;

const MAX_ATTEMPTS: u32 = 64;

/// Board generation parameters. Fractions are of the cells not reserved
/// around the corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardConfig {
    pub size: usize,
    pub rigid_fraction: f64,
    pub wood_fraction: f64,
    /// Fraction of wood cells hiding a power-up.
    pub powerup_fraction: f64,
    pub max_steps: u16,
}

impl BoardConfig {
    pub fn new(size: usize) -> Self {
        BoardConfig { size, rigid_fraction: 0.1, wood_fraction: 0.2, powerup_fraction: 0.5, max_steps: MAX_EPISODE_LEN }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(6..=MAX_SIZE).contains(&self.size) {
            return Err(EnvError::BadSize(self.size));
        }
        for (name, v) in [
            ("rigid_fraction", self.rigid_fraction),
            ("wood_fraction", self.wood_fraction),
            ("powerup_fraction", self.powerup_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(EnvError::BadConfig(format!("{name} = {v} not in [0, 1]")));
            }
        }
        if self.rigid_fraction + self.wood_fraction > 1.0 {
            return Err(EnvError::BadConfig("rigid_fraction + wood_fraction exceeds 1".into()));
        }
        if self.max_steps == 0 || self.max_steps > MAX_EPISODE_LEN {
            return Err(EnvError::BadConfig(format!("max_steps {} not in 1..={MAX_EPISODE_LEN}", self.max_steps)));
        }
        Ok(())
    }
}

impl Default for BoardConfig {
    fn default() -> Self {
        BoardConfig::new(8)
    }
}

/// Generates a random board for `seed`.
///
/// Agents start in two distinct random corners. Rigid walls and wood are laid
/// out symmetrically about the main diagonal, away from the corners. A layout
/// whose agents are not connected through passage or wood is thrown away and
/// regenerated from a derived seed.
pub fn generate_board(seed: u64, config: &BoardConfig) -> Result<GameState, EnvError> {
    config.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeding::rng(seeding::derive(seed, attempt as u64));
        let state = layout(seed, config, &mut rng);
        if connected(&state) {
            return Ok(state);
        }
    }
    Err(EnvError::Disconnected { seed, attempts: MAX_ATTEMPTS })
}

fn corners(n: u8) -> [Pos; 4] {
    [Pos::new(0, 0), Pos::new(0, n - 1), Pos::new(n - 1, 0), Pos::new(n - 1, n - 1)]
}

fn layout(seed: u64, config: &BoardConfig, rng: &mut impl Rng) -> GameState {
    let n = config.size as u8;
    let all_corners = corners(n);
    let picked: Vec<Pos> = all_corners.choose_multiple(rng, 2).copied().collect();

    let mut state = GameState::empty(config.size, [picked[0], picked[1]]).expect("size validated");
    state.seed = seed;
    state.max_steps = config.max_steps;
    state.agents = [AgentAttr::new(picked[0]), AgentAttr::new(picked[1])];

    let mut reserved = vec![false; config.size * config.size];
    for c in all_corners {
        reserved[state.index(c)] = true;
        for dir in super::Direction::ALL {
            if let Some(p) = c.shifted(dir, config.size) {
                reserved[state.index(p)] = true;
            }
        }
    }

    // Mirror pairs (r,c)/(c,r) from the upper triangle; diagonal cells are
    // singletons.
    let mut units: Vec<Vec<Pos>> = Vec::new();
    for r in 0..n {
        for c in r..n {
            let p = Pos::new(r, c);
            if reserved[state.index(p)] {
                continue;
            }
            if r == c {
                units.push(vec![p]);
            } else {
                units.push(vec![p, Pos::new(c, r)]);
            }
        }
    }
    let free: usize = units.iter().map(Vec::len).sum();
    units.shuffle(rng);

    let rigid_target = (config.rigid_fraction * free as f64).round() as usize;
    let wood_target = (config.wood_fraction * free as f64).round() as usize;
    let mut units = units.into_iter();
    let mut fill = |target: usize, cell: Cell, state: &mut GameState| {
        let mut placed = Vec::new();
        while placed.len() < target {
            let Some(unit) = units.next() else { break };
            for p in unit {
                state.set_cell(p, cell);
                placed.push(p);
            }
        }
        placed
    };
    fill(rigid_target, Cell::RIGID, &mut state);
    let mut wood = fill(wood_target, Cell::WOOD, &mut state);

    wood.shuffle(rng);
    let hidden = (config.powerup_fraction * wood.len() as f64).round() as usize;
    for &p in wood.iter().take(hidden) {
        let kind = PowerUp::ALL[rng.gen_range(0..PowerUp::ALL.len())];
        state.set_cell(p, Cell { kind: CellKind::Wood, powerup: Some(kind) });
    }
    state
}

/// Flood fill from agent 0 through passage and wood; true when agent 1's
/// cell is reached.
pub(crate) fn connected(state: &GameState) -> bool {
    let n = state.size();
    let start = state.agent(0).pos;
    let goal = state.agent(1).pos;
    let mut seen = vec![false; n * n];
    let mut stack = vec![start];
    seen[state.index(start)] = true;
    while let Some(p) = stack.pop() {
        if p == goal {
            return true;
        }
        for dir in super::Direction::ALL {
            if let Some(q) = p.shifted(dir, n) {
                let qi = state.index(q);
                if !seen[qi] && state.cell(q).kind != CellKind::Rigid {
                    seen[qi] = true;
                    stack.push(q);
                }
            }
        }
    }
    false
}
