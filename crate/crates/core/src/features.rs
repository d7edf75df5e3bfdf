//! Agent-centric 28-plane observation encoding.
//!
//! Channel layout (planes are `size × size`, channel-major):
//!
//! | channels | content |
//! |----------|---------|
//! | 0, 1, 2  | passage, rigid, wood |
//! | 3        | bomb positions |
//! | 4        | bomb fuse / 10 |
//! | 5        | bomb blast radius / size |
//! | 6        | flame positions |
//! | 7        | flame remaining life / 2 |
//! | 8, 9, 10 | visible power-ups: extra bomb, blast radius, kick |
//! | 11..=14  | agent slots: 11 = observer, 12 = opponent, 13/14 unused |
//! | 15       | constant 1 |
//! | 16..=27  | per slot: ammo / 5 (clipped), blast radius / size, can kick |

use crate::env::{CellKind, GameState, PowerUp, BOMB_LIFE, FLAME_LIFE, NUM_AGENTS};

pub const NUM_CHANNELS: usize = 28;
pub const AGENT_SLOTS: usize = 4;
pub const CH_PASSAGE: usize = 0;
pub const CH_RIGID: usize = 1;
pub const CH_WOOD: usize = 2;
pub const CH_BOMB: usize = 3;
pub const CH_BOMB_FUSE: usize = 4;
pub const CH_BOMB_RADIUS: usize = 5;
pub const CH_FLAME: usize = 6;
pub const CH_FLAME_LIFE: usize = 7;
pub const CH_POWERUP: usize = 8;
pub const CH_AGENT: usize = 11;
pub const CH_ONES: usize = 15;
pub const CH_ABILITY: usize = 16;

const AMMO_SCALE: f32 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTensor {
    size: usize,
    data: Vec<f32>,
}

impl FeatureTensor {
    pub fn zeros(size: usize) -> Self {
        FeatureTensor { size, data: vec![0.0; NUM_CHANNELS * size * size] }
    }

    pub fn from_vec(size: usize, data: Vec<f32>) -> Option<Self> {
        (data.len() == NUM_CHANNELS * size * size).then_some(FeatureTensor { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * self.size + row) * self.size + col]
    }

    #[inline]
    fn set(&mut self, channel: usize, row: usize, col: usize, v: f32) {
        self.data[(channel * self.size + row) * self.size + col] = v;
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.data[channel * n..(channel + 1) * n]
    }

    fn fill_plane(&mut self, channel: usize, v: f32) {
        let n = self.size * self.size;
        self.data[channel * n..(channel + 1) * n].fill(v);
    }
}

/// Encodes `state` from the point of view of `agent_id`.
pub fn encode(state: &GameState, agent_id: usize) -> FeatureTensor {
    assert!(agent_id < NUM_AGENTS, "agent id {agent_id} out of range");
    let n = state.size();
    let mut t = FeatureTensor::zeros(n);

    for pos in state.positions() {
        let (r, c) = (pos.row as usize, pos.col as usize);
        let cell = state.cell(pos);
        let ch = match cell.kind {
            CellKind::Passage => CH_PASSAGE,
            CellKind::Rigid => CH_RIGID,
            CellKind::Wood => CH_WOOD,
        };
        t.set(ch, r, c, 1.0);
        if cell.kind == CellKind::Passage {
            if let Some(p) = cell.powerup {
                t.set(CH_POWERUP + powerup_offset(p), r, c, 1.0);
            }
        }
        let life = state.flame_at(pos);
        if life > 0 {
            t.set(CH_FLAME, r, c, 1.0);
            t.set(CH_FLAME_LIFE, r, c, life as f32 / FLAME_LIFE as f32);
        }
    }

    for bomb in state.bombs() {
        let (r, c) = (bomb.pos.row as usize, bomb.pos.col as usize);
        t.set(CH_BOMB, r, c, 1.0);
        t.set(CH_BOMB_FUSE, r, c, bomb.fuse as f32 / BOMB_LIFE as f32);
        t.set(CH_BOMB_RADIUS, r, c, bomb.blast_radius as f32 / n as f32);
    }

    // Slot 0 is the observer, slot 1 the opponent.
    let order = [agent_id, 1 - agent_id];
    for (slot, &id) in order.iter().enumerate() {
        let a = state.agent(id);
        if a.alive {
            t.set(CH_AGENT + slot, a.pos.row as usize, a.pos.col as usize, 1.0);
        }
        let base = CH_ABILITY + 3 * slot;
        t.fill_plane(base, (a.ammo as f32 / AMMO_SCALE).min(1.0));
        t.fill_plane(base + 1, a.blast_radius as f32 / n as f32);
        t.fill_plane(base + 2, if a.can_kick { 1.0 } else { 0.0 });
    }
    t.fill_plane(CH_ONES, 1.0);
    t
}

fn powerup_offset(p: PowerUp) -> usize {
    p.index()
}

/// Order-sensitive FNV-1a over the bit patterns of a tensor.
pub fn checksum(t: &FeatureTensor) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in &t.data {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
