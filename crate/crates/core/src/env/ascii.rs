//! Text rendering and hand-written layouts.
//!
//! | char | meaning |
//! |------|---------|
//! | `.`  | passage |
//! | `#`  | rigid wall |
//! | `w`  | wood |
//! | `0`,`1` | agent on a passage |
//! | `b`,`r`,`k` | visible power-up: extra bomb, blast radius, kick |
//! | `B`  | bomb (rendering only) |
//! | `*`  | flame (rendering only) |

use super::{Cell, CellKind, EnvError, GameState, Pos, PowerUp, MAX_SIZE};

impl GameState {
    /// Builds a state from rows of the layout alphabet above. Both agents
    /// must appear exactly once.
    pub fn from_ascii(rows: &[&str]) -> Result<GameState, EnvError> {
        let n = rows.len();
        if !(6..=MAX_SIZE).contains(&n) {
            return Err(EnvError::BadSize(n));
        }
        let mut agents = [None, None];
        let mut cells = Vec::with_capacity(n * n);
        for (r, row) in rows.iter().enumerate() {
            let chars: Vec<char> = row.chars().filter(|c| !c.is_whitespace()).collect();
            if chars.len() != n {
                return Err(EnvError::Layout(format!("row {r} has {} cells, expected {n}", chars.len())));
            }
            for (c, ch) in chars.into_iter().enumerate() {
                let pos = Pos::new(r as u8, c as u8);
                let cell = match ch {
                    '.' => Cell::PASSAGE,
                    '#' => Cell::RIGID,
                    'w' => Cell::WOOD,
                    'b' => Cell { kind: CellKind::Passage, powerup: Some(PowerUp::ExtraBomb) },
                    'r' => Cell { kind: CellKind::Passage, powerup: Some(PowerUp::BlastRadius) },
                    'k' => Cell { kind: CellKind::Passage, powerup: Some(PowerUp::Kick) },
                    '0' | '1' => {
                        let id = (ch as u8 - b'0') as usize;
                        if agents[id].replace(pos).is_some() {
                            return Err(EnvError::Layout(format!("agent {id} appears twice")));
                        }
                        Cell::PASSAGE
                    }
                    other => return Err(EnvError::Layout(format!("unknown layout char {other:?}"))),
                };
                cells.push((pos, cell));
            }
        }
        let (Some(a0), Some(a1)) = (agents[0], agents[1]) else {
            return Err(EnvError::Layout("both agents 0 and 1 must be placed".into()));
        };
        let mut state = GameState::empty(n, [a0, a1])?;
        for (pos, cell) in cells {
            state.set_cell(pos, cell);
        }
        Ok(state)
    }

    pub fn render(&self) -> String {
        let n = self.size();
        let mut out = String::with_capacity(n * (n + 1));
        for r in 0..n {
            for c in 0..n {
                let p = Pos::new(r as u8, c as u8);
                let ch = if let Some(i) = self.agent_at(p) {
                    (b'0' + i as u8) as char
                } else if self.bomb_at(p).is_some() {
                    'B'
                } else if self.flame_at(p) > 0 {
                    '*'
                } else {
                    let cell = self.cell(p);
                    match (cell.kind, cell.powerup) {
                        (CellKind::Rigid, _) => '#',
                        (CellKind::Wood, _) => 'w',
                        (CellKind::Passage, Some(PowerUp::ExtraBomb)) => 'b',
                        (CellKind::Passage, Some(PowerUp::BlastRadius)) => 'r',
                        (CellKind::Passage, Some(PowerUp::Kick)) => 'k',
                        (CellKind::Passage, None) => '.',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}
