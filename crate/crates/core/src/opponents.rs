//! Scripted opponents.
//!
//! The rule-based agent runs a priority cascade each step:
//!
//! 1. flee: standing in a pending blast zone (or next to a cell whose bomb is
//!    about to go off) means walking the shortest safe path to the nearest
//!    cell outside every blast zone;
//! 2. bomb the opponent when it sits inside our own blast cross;
//! 3. walk towards the nearest reachable visible power-up;
//! 4. next to wood, bomb it with probability one half;
//! 5. otherwise wander to a random neighbour outside any blast zone, or stop.
//!
//! Paths come from Dijkstra over the walkable cells, recomputed every step.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{for_each_blast_cell, Action, CellKind, Direction, GameState, Pos, MAX_CELLS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentKind {
    Static,
    RuleBased,
}

impl OpponentKind {
    pub fn act(self, state: &GameState, agent_id: usize, rng: &mut impl Rng) -> Action {
        match self {
            OpponentKind::Static => static_policy(state, agent_id),
            OpponentKind::RuleBased => rule_based_policy(state, agent_id, rng),
        }
    }
}

impl std::str::FromStr for OpponentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "static" => Ok(OpponentKind::Static),
            "rulebased" | "rule" => Ok(OpponentKind::RuleBased),
            other => Err(format!("unknown opponent kind {other:?} (expected static or rule-based)")),
        }
    }
}

impl std::fmt::Display for OpponentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OpponentKind::Static => "static",
            OpponentKind::RuleBased => "rule-based",
        })
    }
}

/// The static opponent never moves.
pub fn static_policy(_state: &GameState, _agent_id: usize) -> Action {
    Action::Stop
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleBasedConfig {
    /// Slack added to path distance when deciding a neighbouring bomb is imminent.
    pub safety_slack: u8,
    /// Chance of bombing adjacent wood.
    pub wood_bomb_prob: f64,
}

impl Default for RuleBasedConfig {
    fn default() -> Self {
        RuleBasedConfig { safety_slack: 2, wood_bomb_prob: 0.5 }
    }
}

pub fn rule_based_policy(state: &GameState, agent_id: usize, rng: &mut impl Rng) -> Action {
    rule_based_policy_with(state, agent_id, rng, &RuleBasedConfig::default())
}

pub fn rule_based_policy_with(
    state: &GameState,
    agent_id: usize,
    rng: &mut impl Rng,
    config: &RuleBasedConfig,
) -> Action {
    let me = *state.agent(agent_id);
    if !me.alive {
        return Action::Stop;
    }
    let danger = DangerMap::new(state);
    let here = me.pos;

    // (1) flee
    let imminent_nearby = Direction::ALL.iter().filter_map(|&d| here.shifted(d, state.size())).any(|p| {
        walkable(state, p, agent_id)
            && danger.fuse_at(state, p).is_some_and(|f| f <= 1 + config.safety_slack)
    });
    if danger.fuse_at(state, here).is_some() || imminent_nearby {
        if danger.fuse_at(state, here).is_none() {
            return Action::Stop;
        }
        let paths = Paths::search(state, agent_id, |p, arrival| {
            // A cell is deadly on the step its bomb fires and the step after.
            !danger.fuse_at(state, p).is_some_and(|f| arrival == f as u32 || arrival == f as u32 + 1)
        });
        if let Some(action) = paths.first_step_to_nearest(state, |p| danger.fuse_at(state, p).is_none()) {
            return action;
        }
        return wander(state, agent_id, &danger, rng);
    }

    let can_bomb = me.ammo > 0 && state.bomb_at(here).is_none();

    // (2) opponent inside our blast cross
    let foe = state.agent(1 - agent_id);
    if can_bomb && foe.alive {
        let mut hit = false;
        for_each_blast_cell(state, here, me.blast_radius, |p| hit |= p == foe.pos);
        if hit {
            return Action::Bomb;
        }
    }

    // (3) nearest visible power-up
    let paths = Paths::search(state, agent_id, |p, _| danger.fuse_at(state, p).is_none());
    if let Some(action) = paths.first_step_to_nearest(state, |p| {
        let c = state.cell(p);
        c.kind == CellKind::Passage && c.powerup.is_some()
    }) {
        if action != Action::Stop {
            return action;
        }
    }

    // (4) adjacent wood
    let next_to_wood = Direction::ALL
        .iter()
        .filter_map(|&d| here.shifted(d, state.size()))
        .any(|p| state.cell(p).kind == CellKind::Wood);
    if can_bomb && next_to_wood && rng.gen_bool(config.wood_bomb_prob) {
        return Action::Bomb;
    }

    // (5) wander
    wander(state, agent_id, &danger, rng)
}

fn wander(state: &GameState, agent_id: usize, danger: &DangerMap, rng: &mut impl Rng) -> Action {
    let here = state.agent(agent_id).pos;
    let mut options = [Action::Stop; 4];
    let mut n = 0;
    for d in Direction::ALL {
        if let Some(p) = here.shifted(d, state.size()) {
            if walkable(state, p, agent_id) && danger.fuse_at(state, p).is_none() {
                options[n] = d.action();
                n += 1;
            }
        }
    }
    if n == 0 {
        Action::Stop
    } else {
        options[rng.gen_range(0..n)]
    }
}

/// Passage without bomb, flame or the other agent.
fn walkable(state: &GameState, p: Pos, agent_id: usize) -> bool {
    state.cell(p).kind == CellKind::Passage
        && state.bomb_at(p).is_none()
        && state.flame_at(p) == 0
        && state.agent_at(p).is_none_or(|i| i == agent_id)
}

/// Earliest-firing fuse covering each cell, with chain reactions folded in: a
/// bomb caught in another's blast inherits the shorter fuse.
pub struct DangerMap {
    fuse: [u8; MAX_CELLS],
}

impl DangerMap {
    pub fn new(state: &GameState) -> Self {
        let bombs = state.bombs();
        let mut eff: Vec<u8> = bombs.iter().map(|b| b.fuse).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..bombs.len() {
                for j in 0..bombs.len() {
                    if i == j || eff[j] <= eff[i] {
                        continue;
                    }
                    let mut reached = false;
                    for_each_blast_cell(state, bombs[i].pos, bombs[i].blast_radius, |p| {
                        reached |= p == bombs[j].pos
                    });
                    if reached {
                        eff[j] = eff[i];
                        changed = true;
                    }
                }
            }
        }
        let mut fuse = [0u8; MAX_CELLS];
        for (b, &f) in bombs.iter().zip(&eff) {
            for_each_blast_cell(state, b.pos, b.blast_radius, |p| {
                let i = state.index(p);
                fuse[i] = if fuse[i] == 0 { f } else { fuse[i].min(f) };
            });
        }
        DangerMap { fuse }
    }

    /// Effective fuse of the earliest bomb whose blast covers `p`.
    pub fn fuse_at(&self, state: &GameState, p: Pos) -> Option<u8> {
        let f = self.fuse[state.index(p)];
        (f > 0).then_some(f)
    }
}

/// Single-source shortest paths over walkable cells with unit step cost.
struct Paths {
    dist: [u32; MAX_CELLS],
    first: [Option<Action>; MAX_CELLS],
    order: Vec<usize>,
}

impl Paths {
    /// `allowed(p, arrival_step)` filters cells on the way; the start cell is
    /// always allowed.
    fn search(state: &GameState, agent_id: usize, allowed: impl Fn(Pos, u32) -> bool) -> Paths {
        let start = state.agent(agent_id).pos;
        let mut dist = [u32::MAX; MAX_CELLS];
        let mut first = [None; MAX_CELLS];
        let mut order = Vec::new();
        let mut heap = BinaryHeap::new();
        let s = state.index(start);
        dist[s] = 0;
        first[s] = Some(Action::Stop);
        heap.push(Reverse((0u32, s)));
        while let Some(Reverse((d, i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            order.push(i);
            let p = state.pos_of(i);
            for dir in Direction::ALL {
                let Some(q) = p.shifted(dir, state.size()) else { continue };
                let qi = state.index(q);
                let nd = d + 1;
                if nd < dist[qi] && walkable(state, q, agent_id) && allowed(q, nd) {
                    dist[qi] = nd;
                    first[qi] = if i == s { Some(dir.action()) } else { first[i] };
                    heap.push(Reverse((nd, qi)));
                }
            }
        }
        Paths { dist, first, order }
    }

    /// First action towards the closest settled cell satisfying `goal`
    /// (ties go to the earlier-settled cell).
    fn first_step_to_nearest(&self, state: &GameState, goal: impl Fn(Pos) -> bool) -> Option<Action> {
        self.order
            .iter()
            .find(|&&i| self.dist[i] != u32::MAX && goal(state.pos_of(i)))
            .and_then(|&i| self.first[i])
    }
}
