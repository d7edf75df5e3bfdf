#![allow(dead_code)]

use pia3c::env::{Action, Bomb, GameState, Pos, NUM_ACTIONS};

/// Agent 0 stands in a corridor next to its own bomb, which also covers the
/// walled-in agent 1. The blast fills the corridor; the only cell out of it
/// is reached by walking right `plies - 1` times and then down, and the bomb
/// goes off on the last allowed step.
pub fn escape_toy(plies: usize) -> GameState {
    assert!((2..=4).contains(&plies));
    let exit_col = 1 + plies;
    let mut row3 = String::from("########");
    row3.replace_range(exit_col..exit_col + 1, ".");
    let rows = ["########", "#1######", "#.0....#", row3.as_str(), "########", "########", "########", "########"];
    let mut s = GameState::from_ascii(&rows).unwrap();
    s.agent_mut(1).ammo = 0;
    s.insert_bomb(Bomb { pos: Pos::new(2, 1), fuse: plies as u8, blast_radius: 7, owner: 0, moving: None }).unwrap();
    s.set_max_steps(plies as u16);
    s
}

/// Expectimax over the whole game: the planner maximises, the opponent is
/// uniform. Values are undiscounted terminal rewards for `agent`, 0 for a
/// non-terminal state with no plies left.
pub fn exact_value(s: &GameState, agent: usize, plies: usize) -> f64 {
    if let Some(o) = s.outcome() {
        return o.reward_for(agent) as f64;
    }
    if plies == 0 {
        return 0.0;
    }
    root_action_values(s, agent, plies).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn root_action_values(s: &GameState, agent: usize, plies: usize) -> [f64; NUM_ACTIONS] {
    let mut q = [0.0; NUM_ACTIONS];
    for a in 0..NUM_ACTIONS {
        let mut total = 0.0;
        for b in 0..NUM_ACTIONS {
            let mut actions = [Action::ALL[b]; 2];
            actions[agent] = Action::ALL[a];
            let next = s.step(actions).unwrap().next_state;
            total += exact_value(&next, agent, plies - 1);
        }
        q[a] = total / NUM_ACTIONS as f64;
    }
    q
}

/// The unique maximiser of `q`, if there is one.
pub fn unique_best(q: &[f64; NUM_ACTIONS]) -> Option<Action> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best: Vec<usize> = (0..NUM_ACTIONS).filter(|&a| q[a] == max).collect();
    (best.len() == 1).then(|| Action::ALL[best[0]])
}
