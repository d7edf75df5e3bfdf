//! Central-difference gradient checks.
//!
//! A probe pair `w ± ε` that flips any ReLU unit between active and inactive
//! straddles a kink of the loss; the difference quotient there is not an
//! estimate of the derivative at `w`, so such coordinates are reported as
//! kinked, excluded from the error statistic, and re-probed at `ε / 100`.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

use super::grad::evaluate;
use super::{loss_and_grad, NetError, NetParams, NetShape, CONV_LAYERS};
use crate::loss::{LossSpec, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct CoordCheck {
    pub index: usize,
    pub tensor: String,
    pub analytic: f64,
    pub numeric: f64,
    /// The probe interval crosses a ReLU kink.
    pub kinked: bool,
    /// For kinked coordinates, the difference quotient at `ε / 100`.
    pub fine_numeric: Option<f64>,
}

impl CoordCheck {
    /// `|a − n| / max(|a|, |n|)`; both below `1e-8` counts as agreement.
    pub fn relative_error(&self) -> f64 {
        relative_error(self.analytic, self.numeric)
    }

    pub fn fine_relative_error(&self) -> Option<f64> {
        self.fine_numeric.map(|n| relative_error(self.analytic, n))
    }
}

fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-8 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Name of the tensor holding flat parameter `index`.
pub fn tensor_name(shape: NetShape, index: usize) -> String {
    let l = shape.layout();
    for i in 0..CONV_LAYERS {
        if l.conv_w[i].contains(&index) {
            return format!("conv{}.w", i + 1);
        }
        if l.conv_b[i].contains(&index) {
            return format!("conv{}.b", i + 1);
        }
    }
    let named = [
        (&l.dense_w, "dense.w"),
        (&l.dense_b, "dense.b"),
        (&l.policy_w, "policy.w"),
        (&l.policy_b, "policy.b"),
        (&l.value_w, "value.w"),
        (&l.value_b, "value.b"),
    ];
    named.iter().find(|(r, _)| r.contains(&index)).map(|(_, n)| n.to_string()).unwrap_or_else(|| "out-of-range".into())
}

/// `count` distinct coordinates spread over every tensor: each tensor gets
/// an equal share (capped by its size), the rest is drawn uniformly.
/// Coordinates in `exclude` are never returned.
pub fn sample_coordinates<R: Rng>(shape: NetShape, count: usize, exclude: &BTreeSet<usize>, rng: &mut R) -> Vec<usize> {
    let l = shape.layout();
    let mut ranges = Vec::new();
    for i in 0..CONV_LAYERS {
        ranges.push(l.conv_w[i].clone());
        ranges.push(l.conv_b[i].clone());
    }
    ranges.extend([l.dense_w, l.dense_b, l.policy_w, l.policy_b, l.value_w, l.value_b]);
    let share = count / ranges.len();
    let available = l.total - exclude.len();
    let mut picked = BTreeSet::new();
    for r in &ranges {
        for k in sample(rng, r.len(), share.min(r.len())) {
            if !exclude.contains(&(r.start + k)) {
                picked.insert(r.start + k);
            }
        }
    }
    while picked.len() < count.min(available) {
        let i = rng.gen_range(0..l.total);
        if !exclude.contains(&i) {
            picked.insert(i);
        }
    }
    picked.into_iter().collect()
}

/// Compares the analytic gradient with central differences of the total
/// loss at each coordinate. Clipping is switched off for the comparison.
pub fn finite_difference_check(
    params: &NetParams<f64>,
    traj: &Trajectory,
    spec: &LossSpec,
    coords: &[usize],
    eps: f64,
) -> Result<Vec<CoordCheck>, NetError> {
    let spec = LossSpec { clip_norm: None, ..*spec };
    let (_, grads) = loss_and_grad(params, traj, &spec)?;
    let pattern = |p: &NetParams<f64>| -> Result<(f64, Vec<bool>), NetError> {
        let (ev, _) = evaluate(p, traj, &spec)?;
        Ok((ev.components.total, ev.acts.iter().flat_map(|a| a.active_units()).collect()))
    };
    let (_, base) = pattern(params)?;
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(coords.len());
    for &i in coords {
        let w = params.as_slice()[i];
        probe.as_mut_slice()[i] = w + eps;
        let (plus, up) = pattern(&probe)?;
        probe.as_mut_slice()[i] = w - eps;
        let (minus, down) = pattern(&probe)?;
        let kinked = up != base || down != base;
        let fine_numeric = if kinked {
            let fine = eps / 100.0;
            probe.as_mut_slice()[i] = w + fine;
            let plus = pattern(&probe)?.0;
            probe.as_mut_slice()[i] = w - fine;
            let minus = pattern(&probe)?.0;
            Some((plus - minus) / (2.0 * fine))
        } else {
            None
        };
        probe.as_mut_slice()[i] = w;
        out.push(CoordCheck {
            index: i,
            tensor: tensor_name(params.shape(), i),
            analytic: grads.as_slice()[i],
            numeric: (plus - minus) / (2.0 * eps),
            kinked,
            fine_numeric,
        });
    }
    Ok(out)
}

/// Checks coordinates until `count` smooth (kink-free) ones have been
/// compared, drawing replacements for kinked ones. Gives up drawing after
/// `4 · count` coordinates in total.
pub fn smooth_check<R: Rng>(
    params: &NetParams<f64>,
    traj: &Trajectory,
    spec: &LossSpec,
    count: usize,
    eps: f64,
    rng: &mut R,
) -> Result<Vec<CoordCheck>, NetError> {
    let shape = params.shape();
    let mut seen = BTreeSet::new();
    let mut out: Vec<CoordCheck> = Vec::new();
    let mut want = count;
    while want > 0 && seen.len() < 4 * count {
        let coords = sample_coordinates(shape, want, &seen, rng);
        if coords.is_empty() {
            break;
        }
        seen.extend(&coords);
        let batch = finite_difference_check(params, traj, spec, &coords, eps)?;
        out.extend(batch);
        want = count.saturating_sub(out.iter().filter(|c| !c.kinked).count());
    }
    Ok(out)
}
