use serde::{Deserialize, Serialize};

use super::{backward, forward, Activations, Gradients, NetError, NetParams, Real};
use crate::env::{Action, NUM_ACTIONS};
use crate::loss::{compute_advantages, compute_returns, loss_terms, Composition, LossComponents, LossSpec, Trajectory};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub components: LossComponents,
    /// Global gradient norm before clipping.
    pub grad_norm: f64,
}

pub(super) struct Evaluated<T> {
    pub(super) acts: Vec<Activations<T>>,
    policies: Vec<[f64; NUM_ACTIONS]>,
    values: Vec<f64>,
    returns: Vec<f64>,
    advantages: Vec<f64>,
    actions: Vec<Action>,
    pub(super) components: LossComponents,
}

pub(super) fn evaluate<'a, T: Real>(
    params: &NetParams<T>,
    traj: &'a Trajectory,
    spec: &LossSpec,
) -> Result<(Evaluated<T>, Option<&'a [Action]>), NetError> {
    if traj.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    let planner = match spec.composition {
        Composition::PiA3c => Some(traj.planner_actions.as_deref().ok_or(NetError::MissingPlannerActions)?),
        Composition::A3c => None,
    };
    let returns = compute_returns(traj, spec.gamma);
    let advantages = compute_advantages(traj, spec.gamma);
    let actions = traj.actions();

    let mut acts = Vec::with_capacity(traj.len());
    let mut input = Vec::new();
    for step in &traj.steps {
        input.clear();
        input.extend(step.features.as_slice().iter().map(|&v| T::of_f64(v as f64)));
        acts.push(forward(params, &input)?);
    }
    let policies: Vec<[f64; NUM_ACTIONS]> = acts.iter().map(|a| a.output.policy.map(|p| p.as_f64())).collect();
    let values: Vec<f64> = acts.iter().map(|a| a.output.value.as_f64()).collect();
    let components = loss_terms(spec, &actions, &policies, &values, &returns, &advantages, planner);
    if let Some(name) = components.non_finite() {
        return Err(NetError::NonFiniteLoss(name));
    }
    Ok((Evaluated { acts, policies, values, returns, advantages, actions, components }, planner))
}

/// Loss of `traj` under `params` without the backward pass.
pub fn loss<T: Real>(params: &NetParams<T>, traj: &Trajectory, spec: &LossSpec) -> Result<LossComponents, NetError> {
    Ok(evaluate(params, traj, spec)?.0.components)
}

/// Loss of `traj` under `params` and its exact gradient.
///
/// Returns and advantages come from the rewards and values recorded in the
/// trajectory and are held constant; policies and values are recomputed
/// with `params`.
pub fn loss_and_grad<T: Real>(
    params: &NetParams<T>,
    traj: &Trajectory,
    spec: &LossSpec,
) -> Result<(LossReport, Gradients<T>), NetError> {
    let (ev, planner) = evaluate(params, traj, spec)?;
    let Evaluated { acts, policies, values, returns, advantages, actions, components } = ev;

    let n = traj.len() as f64;
    let mut grads = Gradients::zeros(params.len());
    for (t, act) in acts.iter().enumerate() {
        let p = &policies[t];
        let h = crate::loss::entropy(p);
        let mut dz = [0.0f64; NUM_ACTIONS];
        for j in 0..NUM_ACTIONS {
            let taken = if j == actions[t].index() { 1.0 } else { 0.0 };
            // −Â·∂log π(a)/∂z_j = −Â·(1[j=a] − π_j)
            dz[j] += spec.policy_weight * -advantages[t] * (taken - p[j]);
            // ∂H/∂z_j = −π_j (log π_j + H)
            let dh = if p[j] > 0.0 { -p[j] * (p[j].ln() + h) } else { 0.0 };
            dz[j] -= spec.entropy_weight * dh;
            if let Some(pa) = planner {
                let target = if j == pa[t].index() { 1.0 } else { 0.0 };
                dz[j] += spec.imitation_weight * (p[j] - target);
            }
            dz[j] /= n;
        }
        let dv = -2.0 * spec.value_weight * (returns[t] - values[t]) / n;
        backward(params, act, &dz.map(T::of_f64), T::of_f64(dv), grads.as_mut_slice())?;
    }
    let grad_norm = grads.norm();
    if !grad_norm.is_finite() {
        return Err(NetError::NonFiniteGradient);
    }
    if let Some(c) = spec.clip_norm {
        grads.clip_norm(c);
    }
    Ok((LossReport { components, grad_norm }, grads))
}
