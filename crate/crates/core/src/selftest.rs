//! Built-in checks behind the `selftest` command: environment invariants
//! and finite-difference gradient checks.

use std::collections::VecDeque;

use rand::Rng;

use crate::env::{generate_board, Action, BoardConfig, CellKind, GameState, Outcome, Pos, MAX_EPISODE_LEN};
use crate::features::encode;
use crate::loss::{Composition, LossSpec, Step, Trajectory};
use crate::network::gradcheck::{smooth_check, CoordCheck};
use crate::network::{NetError, NetParams, NetShape};
use crate::seeding;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn from(name: &str, r: Result<String, String>) -> Self {
        match r {
            Ok(detail) => CheckResult { name: name.into(), passed: true, detail },
            Err(detail) => CheckResult { name: name.into(), passed: false, detail },
        }
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

fn open_board() -> GameState {
    let rows = ["0.......", "........", "........", "........", "........", "........", "........", ".......1"];
    GameState::from_ascii(&rows).expect("valid board")
}

/// A bomb placed at step t shows flames in the state returned by the 10th
/// following step, and not before.
pub fn check_bomb_timing() -> Result<String, String> {
    let mut s = open_board();
    s.advance([Action::Bomb, Action::Stop]).map_err(|e| e.to_string())?;
    // step off the blast cross: (0,0) → (1,0) → (1,1) → (2,1)... radius 2 cross
    // covers (0,0),(0,1),(1,0); (1,1) is clear.
    let moves = [Action::Down, Action::Right];
    let bomb_cell = Pos::new(0, 0);
    for k in 1..=10 {
        let a = moves.get(k - 1).copied().unwrap_or(Action::Stop);
        s.advance([a, Action::Stop]).map_err(|e| e.to_string())?;
        let lit = s.flame_at(bomb_cell) > 0;
        if lit != (k == 10) {
            return Err(format!("flame state {lit} after {k} steps"));
        }
    }
    Ok("explodes on the 10th step".into())
}

/// Flames created at step t are gone after two further steps.
pub fn check_flame_duration() -> Result<String, String> {
    let mut s = open_board();
    s.advance([Action::Bomb, Action::Stop]).map_err(|e| e.to_string())?;
    s.advance([Action::Down, Action::Stop]).map_err(|e| e.to_string())?;
    s.advance([Action::Right, Action::Stop]).map_err(|e| e.to_string())?;
    while s.flame_at(Pos::new(0, 0)) == 0 {
        s.advance([Action::Stop, Action::Stop]).map_err(|e| e.to_string())?;
    }
    s.advance([Action::Stop, Action::Stop]).map_err(|e| e.to_string())?;
    if s.flame_at(Pos::new(0, 0)) == 0 {
        return Err("flames vanished after one step".into());
    }
    s.advance([Action::Stop, Action::Stop]).map_err(|e| e.to_string())?;
    if s.flames().count() != 0 {
        return Err("flames still present after two steps".into());
    }
    Ok("flames last two steps".into())
}

/// Standing still until the step cap ends in a tie that costs both agents.
pub fn check_step_cap() -> Result<String, String> {
    let mut s = generate_board(3, &BoardConfig::new(8)).map_err(|e| e.to_string())?;
    let mut last = None;
    for t in 0..MAX_EPISODE_LEN {
        let info = s.advance([Action::Stop, Action::Stop]).map_err(|e| e.to_string())?;
        if info.terminal != (t + 1 == MAX_EPISODE_LEN) {
            return Err(format!("terminal={} at step {}", info.terminal, t + 1));
        }
        last = Some(info);
    }
    let info = last.expect("ran steps");
    if info.outcome != Some(Outcome::Tie) || info.rewards != [-1.0, -1.0] {
        return Err(format!("outcome {:?} rewards {:?}", info.outcome, info.rewards));
    }
    Ok(format!("tie with rewards {:?} after {MAX_EPISODE_LEN} steps", info.rewards))
}

/// Breadth-first search from agent 0 to agent 1 treating wood as open.
pub fn agents_connected(s: &GameState) -> bool {
    let n = s.size();
    let mut seen = vec![false; n * n];
    let mut queue = VecDeque::from([s.agent(0).pos]);
    seen[s.index(s.agent(0).pos)] = true;
    while let Some(p) = queue.pop_front() {
        if p == s.agent(1).pos {
            return true;
        }
        let (r, c) = (p.row as i32, p.col as i32);
        for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            if !s.in_bounds(r + dr, c + dc) {
                continue;
            }
            let q = Pos::new((r + dr) as u8, (c + dc) as u8);
            if !seen[s.index(q)] && s.cell(q).kind != CellKind::Rigid {
                seen[s.index(q)] = true;
                queue.push_back(q);
            }
        }
    }
    false
}

pub fn check_connectivity(boards: u64, size: usize) -> Result<String, String> {
    let cfg = BoardConfig::new(size);
    for seed in 0..boards {
        let s = generate_board(seed, &cfg).map_err(|e| format!("seed {seed}: {e}"))?;
        if !agents_connected(&s) {
            return Err(format!("seed {seed}: agents not connected"));
        }
    }
    Ok(format!("{boards} boards of size {size} connected"))
}

/// Plays one seeded random episode and returns every state.
pub fn random_episode(seed: u64, size: usize) -> Result<Vec<GameState>, String> {
    let mut s = generate_board(seed, &BoardConfig::new(size)).map_err(|e| e.to_string())?;
    let mut rng = seeding::rng(seeding::derive(seed, seeding::tag("random_episode")));
    let mut trace = vec![s.clone()];
    while !s.is_terminal() {
        let a = [Action::ALL[rng.gen_range(0..6)], Action::ALL[rng.gen_range(0..6)]];
        s.advance(a).map_err(|e| e.to_string())?;
        trace.push(s.clone());
    }
    Ok(trace)
}

pub fn check_determinism(episodes: u64) -> Result<String, String> {
    let mut steps = 0;
    for seed in 0..episodes {
        let a = random_episode(seed, 8)?;
        let b = random_episode(seed, 8)?;
        if a != b {
            return Err(format!("seed {seed}: traces differ"));
        }
        steps += a.len() - 1;
    }
    Ok(format!("{episodes} episodes ({steps} steps) replayed identically"))
}

pub fn invariant_suite() -> Vec<CheckResult> {
    vec![
        CheckResult::from("bomb fuse", check_bomb_timing()),
        CheckResult::from("flame lifetime", check_flame_duration()),
        CheckResult::from("step cap", check_step_cap()),
        CheckResult::from("connectivity", check_connectivity(1000, 8)),
        CheckResult::from("determinism", check_determinism(20)),
    ]
}

/// A short segment of play from a random board, with the policy and value
/// recorded from `params`. Rewards are drawn at random so every loss term
/// carries signal.
pub fn sample_trajectory(seed: u64, params: &NetParams<f32>, len: usize, demonstration: bool) -> Trajectory {
    let size = params.shape().board_size;
    let mut rng = seeding::rng(seeding::derive(seed, seeding::tag("sample_trajectory")));
    let mut s = generate_board(seed, &BoardConfig::new(size)).expect("board");
    let mut steps = Vec::with_capacity(len);
    let mut planner = Vec::with_capacity(len);
    for _ in 0..len {
        let features = encode(&s, 0);
        let out = params.predict(&features).expect("finite input");
        let action = Action::ALL[rng.gen_range(0..6)];
        steps.push(Step { features, action, reward: rng.gen_range(-1.0..1.0), value: out.value, policy: out.policy });
        planner.push(Action::ALL[rng.gen_range(0..6)]);
        if !s.is_terminal() {
            s.advance([action, Action::ALL[rng.gen_range(0..6)]]).expect("legal step");
        }
    }
    Trajectory {
        steps,
        bootstrap: rng.gen_range(-1.0..1.0),
        terminal: false,
        planner_actions: demonstration.then_some(planner),
    }
}

#[derive(Clone, Debug)]
pub struct GradientCheck {
    pub seed: u64,
    pub composition: Composition,
    pub checks: Vec<CoordCheck>,
}

impl GradientCheck {
    pub fn smooth(&self) -> impl Iterator<Item = &CoordCheck> {
        self.checks.iter().filter(|c| !c.kinked)
    }

    pub fn kinked(&self) -> usize {
        self.checks.iter().filter(|c| c.kinked).count()
    }

    /// Largest relative error over kink-free coordinates.
    pub fn max_relative_error(&self) -> f64 {
        self.smooth().map(CoordCheck::relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CoordCheck> {
        self.smooth().max_by(|a, b| a.relative_error().total_cmp(&b.relative_error()))
    }

    /// Largest relative error of kinked coordinates re-probed at ε / 100.
    pub fn max_fine_error(&self) -> f64 {
        self.checks.iter().filter_map(CoordCheck::fine_relative_error).fold(0.0, f64::max)
    }

    /// Tensors with at least one kink-free coordinate checked.
    pub fn tensors(&self) -> std::collections::BTreeSet<&str> {
        self.smooth().map(|c| c.tensor.as_str()).collect()
    }
}

/// Central-difference check of `coords` coordinates on a seeded network and
/// trajectory, evaluated in double precision.
pub fn gradient_check(seed: u64, composition: Composition, coords: usize, board_size: usize) -> Result<GradientCheck, NetError> {
    let shape = NetShape::new(board_size);
    let mut params = NetParams::<f32>::init(shape, seed);
    // Zero biases put units fed by all-zero patches exactly on the ReLU kink,
    // where central differences are meaningless; nudge them off it.
    let mut rng = seeding::rng(seeding::derive(seed, seeding::tag("gradient_bias")));
    let l = shape.layout();
    for r in l.conv_b.iter().cloned().chain([l.dense_b, l.policy_b, l.value_b]) {
        for b in &mut params.as_mut_slice()[r] {
            *b = rng.gen_range(-0.05..0.05);
        }
    }
    let traj = sample_trajectory(seed, &params, 4, composition == Composition::PiA3c);
    let spec = LossSpec::default().with_composition(composition);
    let mut rng = seeding::rng(seeding::derive(seed, seeding::tag("gradient_coords")));
    let checks = smooth_check(&params.cast::<f64>(), &traj, &spec, coords, 1e-4, &mut rng)?;
    Ok(GradientCheck { seed, composition, checks })
}

pub fn gradient_suite(seeds: &[u64], coords: usize, tolerance: f64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for &seed in seeds {
        for composition in [Composition::A3c, Composition::PiA3c] {
            let name = format!("gradient {composition:?} seed {seed}");
            let r = gradient_check(seed, composition, coords, 8).map_err(|e| e.to_string()).and_then(|g| {
                let worst = g.max_relative_error();
                let smooth = g.smooth().count();
                let detail = format!(
                    "{smooth} coordinates over {} tensors, max relative error {worst:.2e}; {} kinked probes excluded (error {:.2e} at eps/100)",
                    g.tensors().len(),
                    g.kinked(),
                    g.max_fine_error()
                );
                if worst < tolerance && smooth >= coords {
                    Ok(detail)
                } else {
                    let w = g.worst().expect("nonempty");
                    Err(format!("{detail}; worst at {} ({}): analytic {:e} numeric {:e}", w.index, w.tensor, w.analytic, w.numeric))
                }
            });
            out.push(CheckResult::from(&name, r));
        }
    }
    out
}

/// Everything `selftest` runs.
pub fn run_all() -> Vec<CheckResult> {
    let mut out = invariant_suite();
    out.extend(gradient_suite(&[1, 2, 3], 200, 1e-3));
    out
}
