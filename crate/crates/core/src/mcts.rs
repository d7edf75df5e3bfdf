//! UCT planner used as the demonstrator.
//!
//! Each iteration descends the tree by UCB1 over the planning agent's six
//! actions, expands the lowest-numbered unvisited edge, estimates the new
//! leaf with a depth-limited rollout and backs the undiscounted return up the
//! path. The opponent's action is drawn uniformly once, when an edge is
//! expanded, and the resulting child state is kept for later descents. The
//! move played is the root edge with the most visits (lowest action number
//! on ties).
//!
//! Visit counts: the root's count is the sum of its edge counts; any other
//! node counts every iteration that passed through or ended at it, so a node
//! that was expanded once and never descended through has count 1.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, EnvError, GameState, NUM_ACTIONS};
use crate::features::encode;
use crate::network::{NetError, NetParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutPolicy {
    UniformRandom,
    /// The planning agent samples from the network's policy head.
    PolicyHead,
}

impl std::str::FromStr for RolloutPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "uniformrandom" | "uniform" | "random" => Ok(RolloutPolicy::UniformRandom),
            "policyhead" | "policy" => Ok(RolloutPolicy::PolicyHead),
            other => Err(format!("unknown rollout policy {other:?} (expected uniform-random or policy-head)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub rollout_budget: u32,
    pub exploration: f64,
    pub max_tree_depth: u32,
    pub rollout_depth: u32,
    pub rollout_policy: RolloutPolicy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            rollout_budget: 75,
            exploration: std::f64::consts::SQRT_2,
            max_tree_depth: 25,
            rollout_depth: 25,
            rollout_policy: RolloutPolicy::UniformRandom,
        }
    }
}

impl SearchConfig {
    pub fn with_budget(budget: u32) -> Self {
        SearchConfig { rollout_budget: budget, ..Self::default() }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("search started from a terminal state")]
    TerminalRoot,
    #[error("planning agent {0} is not alive")]
    PlannerDead(usize),
    #[error("rollout budget must be at least 1")]
    ZeroBudget,
    #[error("policy-head rollouts need a network")]
    MissingNetwork,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// `Q + C·√(ln n_parent / n_child)`, infinite for an unvisited child.
pub fn ucb1(q: f64, n_parent: u32, n_child: u32, c: f64) -> f64 {
    if n_child == 0 {
        return f64::INFINITY;
    }
    q + c * ((n_parent as f64).ln() / n_child as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Edge {
    pub child: Option<u32>,
    pub visits: u32,
    pub total: f64,
}

impl Edge {
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total / self.visits as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub state: GameState,
    pub visits: u32,
    pub depth: u32,
    pub edges: [Edge; NUM_ACTIONS],
}

/// The tree built by one search, kept for inspection.
#[derive(Clone, Debug)]
pub struct SearchTree {
    pub nodes: Vec<Node>,
    pub agent: usize,
}

impl SearchTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub action: Action,
    pub visits: [u32; NUM_ACTIONS],
    pub q: [f64; NUM_ACTIONS],
    pub tree: SearchTree,
}

/// Robust child: most visits, lowest action number on ties.
pub fn robust_child(visits: &[u32; NUM_ACTIONS]) -> Action {
    let mut best = 0;
    for a in 1..NUM_ACTIONS {
        if visits[a] > visits[best] {
            best = a;
        }
    }
    Action::ALL[best]
}

/// Runs `config.rollout_budget` iterations from `root` for `agent`.
pub fn search<R: Rng>(
    root: &GameState,
    agent: usize,
    config: &SearchConfig,
    net: Option<&NetParams<f32>>,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    if root.is_terminal() {
        return Err(SearchError::TerminalRoot);
    }
    if !root.agent(agent).alive {
        return Err(SearchError::PlannerDead(agent));
    }
    if config.rollout_budget == 0 {
        return Err(SearchError::ZeroBudget);
    }
    if config.rollout_policy == RolloutPolicy::PolicyHead && net.is_none() {
        return Err(SearchError::MissingNetwork);
    }
    let opponent = 1 - agent;
    let mut nodes = vec![Node { state: root.clone(), visits: 0, depth: 0, edges: Default::default() }];
    let mut path: Vec<(usize, usize)> = Vec::with_capacity(config.max_tree_depth as usize + 1);

    for _ in 0..config.rollout_budget {
        path.clear();
        let mut at = 0usize;
        let value = loop {
            let node = &nodes[at];
            if let Some(outcome) = node.state.outcome() {
                break outcome.reward_for(agent) as f64;
            }
            if node.depth >= config.max_tree_depth {
                let state = node.state.clone();
                break rollout(state, agent, config, net, rng)?;
            }
            if let Some(a) = node.edges.iter().position(|e| e.child.is_none()) {
                let mut actions = [Action::Stop; 2];
                actions[agent] = Action::ALL[a];
                actions[opponent] = Action::ALL[rng.gen_range(0..NUM_ACTIONS)];
                let mut child = node.state.clone();
                child.advance(actions)?;
                let depth = node.depth + 1;
                let id = nodes.len() as u32;
                nodes[at].edges[a].child = Some(id);
                path.push((at, a));
                nodes.push(Node { state: child.clone(), visits: 0, depth, edges: Default::default() });
                at = id as usize;
                break rollout(child, agent, config, net, rng)?;
            }
            // Equal scores are broken uniformly at random.
            let n = node.visits;
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            let mut ties = 0;
            for (a, e) in node.edges.iter().enumerate() {
                let score = ucb1(e.mean(), n, e.visits, config.exploration);
                if score > best_score {
                    best = a;
                    best_score = score;
                    ties = 1;
                } else if score == best_score {
                    ties += 1;
                    if rng.gen_range(0..ties) == 0 {
                        best = a;
                    }
                }
            }
            path.push((at, best));
            at = node.edges[best].child.expect("expanded") as usize;
        };
        if at != 0 {
            nodes[at].visits += 1;
        }
        for &(n, a) in &path {
            let node = &mut nodes[n];
            node.visits += 1;
            node.edges[a].visits += 1;
            node.edges[a].total += value;
        }
    }

    let root = &nodes[0];
    let visits = root.edges.map(|e| e.visits);
    let q = root.edges.map(|e| e.mean());
    Ok(SearchResult { action: robust_child(&visits), visits, q, tree: SearchTree { nodes, agent } })
}

/// Plays from `state` for at most `config.rollout_depth` steps. Returns the
/// planning agent's reward if the game ends, 0 otherwise.
pub fn rollout<R: Rng>(
    mut state: GameState,
    agent: usize,
    config: &SearchConfig,
    net: Option<&NetParams<f32>>,
    rng: &mut R,
) -> Result<f64, SearchError> {
    let net = match config.rollout_policy {
        RolloutPolicy::UniformRandom => None,
        RolloutPolicy::PolicyHead => Some(net.ok_or(SearchError::MissingNetwork)?),
    };
    for _ in 0..config.rollout_depth {
        if state.is_terminal() {
            break;
        }
        let mut actions = [Action::Stop; 2];
        actions[agent] = match net {
            Some(p) => sample_policy(&p.predict(&encode(&state, agent))?.policy, rng),
            None => Action::ALL[rng.gen_range(0..NUM_ACTIONS)],
        };
        actions[1 - agent] = Action::ALL[rng.gen_range(0..NUM_ACTIONS)];
        state.advance(actions)?;
    }
    Ok(state.outcome().map_or(0.0, |o| o.reward_for(agent) as f64))
}

/// Draws an action from a probability vector.
pub fn sample_policy<R: Rng>(policy: &[f32; NUM_ACTIONS], rng: &mut R) -> Action {
    match WeightedIndex::new(policy) {
        Ok(d) => Action::ALL[d.sample(rng)],
        Err(_) => Action::ALL[rng.gen_range(0..NUM_ACTIONS)],
    }
}
