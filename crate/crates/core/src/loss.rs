//! Trajectories, n-step advantages and the actor-critic / imitation losses.
//!
//! For a segment of N steps with n-step returns R_t and advantages
//! Â_t = R_t − V(s_t):
//!
//! ```text
//! L_π  = −(1/N) Σ log π(a_t|s_t) · Â_t
//! L_v  =  (1/N) Σ (R_t − V(s_t))²
//! H    =  (1/N) Σ H(π(·|s_t))
//! L_PI = −(1/N) Σ log π(a_t^planner|s_t)
//!
//! A3C    = λ_v L_v + λ_π L_π − λ_H H
//! PI-A3C = A3C + λ_PI L_PI
//! ```

use serde::{Deserialize, Serialize};

use crate::env::{Action, NUM_ACTIONS};
use crate::features::FeatureTensor;

/// Lower bound on probabilities inside `log` for the imitation loss.
pub const PROB_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub features: FeatureTensor,
    pub action: Action,
    pub reward: f32,
    pub value: f32,
    pub policy: [f32; NUM_ACTIONS],
}

/// One update segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    /// V(s_{t+N}) from the acting snapshot, 0 when the segment ended the game.
    pub bootstrap: f32,
    pub terminal: bool,
    /// Planner choices, one per step; present only for demonstrator segments.
    pub planner_actions: Option<Vec<Action>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_demonstration(&self) -> bool {
        self.planner_actions.is_some()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward as f64).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value as f64).collect()
    }

    fn bootstrap_value(&self) -> f64 {
        if self.terminal {
            0.0
        } else {
            self.bootstrap as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    A3c,
    PiA3c,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub value_weight: f64,
    pub policy_weight: f64,
    pub entropy_weight: f64,
    pub imitation_weight: f64,
    pub gamma: f64,
    pub composition: Composition,
    /// Global-norm gradient clipping threshold.
    pub clip_norm: Option<f64>,
}

impl Default for LossSpec {
    fn default() -> Self {
        LossSpec {
            value_weight: 0.5,
            policy_weight: 1.0,
            entropy_weight: 0.01,
            imitation_weight: 1.0,
            gamma: 0.999,
            composition: Composition::A3c,
            clip_norm: Some(40.0),
        }
    }
}

impl LossSpec {
    pub fn with_composition(self, composition: Composition) -> Self {
        LossSpec { composition, ..self }
    }

    pub fn validate(&self) -> Result<(), String> {
        let weights = [
            ("value_weight", self.value_weight),
            ("policy_weight", self.policy_weight),
            ("entropy_weight", self.entropy_weight),
            ("imitation_weight", self.imitation_weight),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(format!("{name} must be a finite non-negative number, got {w}"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(format!("clip_norm must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    /// Present for the PI-A3C composition.
    pub imitation: Option<f64>,
    pub total: f64,
    /// Set when a planner action had probability below [`PROB_FLOOR`].
    pub clamped: bool,
}

impl LossComponents {
    /// Name of the first non-finite component, if any.
    pub fn non_finite(&self) -> Option<&'static str> {
        let named = [("policy", self.policy), ("value", self.value), ("entropy", self.entropy)];
        if let Some((name, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Some(name);
        }
        if self.imitation.is_some_and(|v| !v.is_finite()) {
            return Some("imitation");
        }
        (!self.total.is_finite()).then_some("total")
    }
}

/// n-step discounted returns, bootstrapping from the segment's final value.
pub fn compute_returns(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut ret = traj.bootstrap_value();
    let mut out = vec![0.0; traj.len()];
    for (t, step) in traj.steps.iter().enumerate().rev() {
        ret = step.reward as f64 + gamma * ret;
        out[t] = ret;
    }
    out
}

/// Â_t = Σ_{k<n} γ^k r_{t+k} + γ^n V(s_{t+n}) − V(s_t), with n reaching the end
/// of the segment.
pub fn compute_advantages(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    compute_returns(traj, gamma).iter().zip(&traj.steps).map(|(r, s)| r - s.value as f64).collect()
}

pub fn entropy(p: &[f64; NUM_ACTIONS]) -> f64 {
    -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>()
}

/// Mean cross-entropy between one-hot planner actions and policies. The
/// flag reports whether any probability hit the floor.
pub fn planner_imitation_loss(planner_actions: &[Action], policies: &[[f64; NUM_ACTIONS]]) -> (f64, bool) {
    assert_eq!(planner_actions.len(), policies.len(), "misaligned planner actions");
    assert!(!policies.is_empty(), "empty batch");
    let mut clamped = false;
    let sum: f64 = planner_actions
        .iter()
        .zip(policies)
        .map(|(a, p)| {
            let q = p[a.index()];
            if q < PROB_FLOOR {
                clamped = true;
            }
            -q.max(PROB_FLOOR).ln()
        })
        .sum();
    (sum / policies.len() as f64, clamped)
}

/// Loss components for given per-step policies and values; `returns` and
/// `advantages` are treated as constants.
pub fn loss_terms(
    spec: &LossSpec,
    actions: &[Action],
    policies: &[[f64; NUM_ACTIONS]],
    values: &[f64],
    returns: &[f64],
    advantages: &[f64],
    planner_actions: Option<&[Action]>,
) -> LossComponents {
    let n = actions.len() as f64;
    let mut policy = 0.0;
    let mut value = 0.0;
    let mut ent = 0.0;
    for t in 0..actions.len() {
        let p = policies[t][actions[t].index()];
        policy -= p.ln() * advantages[t];
        value += (returns[t] - values[t]).powi(2);
        ent += entropy(&policies[t]);
    }
    let (policy, value, ent) = (policy / n, value / n, ent / n);
    let mut total = spec.value_weight * value + spec.policy_weight * policy - spec.entropy_weight * ent;
    let mut out = LossComponents { policy, value, entropy: ent, imitation: None, total, clamped: false };
    if spec.composition == Composition::PiA3c {
        if let Some(pa) = planner_actions {
            let (li, clamped) = planner_imitation_loss(pa, policies);
            total += spec.imitation_weight * li;
            out.imitation = Some(li);
            out.total = total;
            out.clamped = clamped;
        }
    }
    out
}

fn recorded_policies(traj: &Trajectory) -> Vec<[f64; NUM_ACTIONS]> {
    traj.steps.iter().map(|s| s.policy.map(|q| q as f64)).collect()
}

/// Actor-critic loss evaluated on the policies and values recorded while acting.
pub fn a3c_loss(traj: &Trajectory, advantages: &[f64], spec: &LossSpec) -> LossComponents {
    assert_eq!(advantages.len(), traj.len(), "misaligned advantages");
    let returns: Vec<f64> = advantages.iter().zip(&traj.steps).map(|(a, s)| a + s.value as f64).collect();
    let spec = spec.with_composition(Composition::A3c);
    loss_terms(&spec, &traj.actions(), &recorded_policies(traj), &traj.values(), &returns, advantages, None)
}

/// Actor-critic loss plus the weighted planner-imitation term. Returns
/// `None` for a trajectory without planner actions.
pub fn pi_a3c_loss(traj: &Trajectory, advantages: &[f64], spec: &LossSpec) -> Option<LossComponents> {
    assert_eq!(advantages.len(), traj.len(), "misaligned advantages");
    let planner = traj.planner_actions.as_deref()?;
    let returns: Vec<f64> = advantages.iter().zip(&traj.steps).map(|(a, s)| a + s.value as f64).collect();
    let spec = spec.with_composition(Composition::PiA3c);
    Some(loss_terms(&spec, &traj.actions(), &recorded_policies(traj), &traj.values(), &returns, advantages, Some(planner)))
}
