//! Convolutional actor-critic.
//!
//! Four 3×3 convolutions (32 filters, stride 1, pad 1, ReLU), a 128-unit
//! ReLU dense layer, a 6-way softmax policy head and a linear value head.
//! Every parameter lives in one flat vector laid out as
//!
//! ```text
//! conv1.w conv1.b conv2.w conv2.b conv3.w conv3.b conv4.w conv4.b
//! dense.w dense.b policy.w policy.b value.w value.b
//! ```
//!
//! with weights row-major `[out][in]` (convolutions `[out][in][ky][kx]`).
//! The math is generic over [`Real`] so that gradient checks can run in
//! `f64` while training runs in `f32`.

mod adam;
mod checkpoint;
mod grad;
pub mod gradcheck;
mod kernels;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, Range, SubAssign};

use num_traits::Float;
use rand::Rng;
use thiserror::Error;

use crate::env::NUM_ACTIONS;
use crate::features::{FeatureTensor, NUM_CHANNELS};
use crate::seeding;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use grad::{loss, loss_and_grad, LossReport};
pub use kernels::{backward, forward, softmax, Activations};

pub const CONV_LAYERS: usize = 4;
pub const FILTERS: usize = 32;
pub const KERNEL: usize = 3;
pub const HIDDEN: usize = 128;

pub trait Real:
    Float + Default + Debug + Sum + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("input has {got} values, expected {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("input contains a non-finite value at index {0}")]
    NonFiniteInput(usize),
    #[error("parameter/gradient length mismatch: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite {0} loss")]
    NonFiniteLoss(&'static str),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("empty trajectory")]
    EmptyBatch,
    #[error("demonstrator loss requested but the trajectory carries no planner actions")]
    MissingPlannerActions,
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub conv_w: [Range<usize>; CONV_LAYERS],
    pub conv_b: [Range<usize>; CONV_LAYERS],
    pub dense_w: Range<usize>,
    pub dense_b: Range<usize>,
    pub policy_w: Range<usize>,
    pub policy_b: Range<usize>,
    pub value_w: Range<usize>,
    pub value_b: Range<usize>,
    pub total: usize,
}

/// Architecture description. Only the board side varies; it fixes the width
/// of the flattened conv output feeding the dense layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetShape {
    pub board_size: usize,
}

impl NetShape {
    pub fn new(board_size: usize) -> Self {
        NetShape { board_size }
    }

    pub fn cells(&self) -> usize {
        self.board_size * self.board_size
    }

    pub fn input_len(&self) -> usize {
        NUM_CHANNELS * self.cells()
    }

    pub fn flat_len(&self) -> usize {
        FILTERS * self.cells()
    }

    pub fn conv_in(layer: usize) -> usize {
        if layer == 0 {
            NUM_CHANNELS
        } else {
            FILTERS
        }
    }

    pub fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let mut conv_w: [Range<usize>; CONV_LAYERS] = Default::default();
        let mut conv_b: [Range<usize>; CONV_LAYERS] = Default::default();
        for l in 0..CONV_LAYERS {
            conv_w[l] = take(FILTERS * Self::conv_in(l) * KERNEL * KERNEL);
            conv_b[l] = take(FILTERS);
        }
        let dense_w = take(HIDDEN * self.flat_len());
        let dense_b = take(HIDDEN);
        let policy_w = take(NUM_ACTIONS * HIDDEN);
        let policy_b = take(NUM_ACTIONS);
        let value_w = take(HIDDEN);
        let value_b = take(1);
        Layout { conv_w, conv_b, dense_w, dense_b, policy_w, policy_b, value_w, value_b, total: at }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }

    /// Canonical text form of the shape table.
    pub fn describe(&self) -> String {
        let mut s = format!("input {}x{}x{};", NUM_CHANNELS, self.board_size, self.board_size);
        for l in 0..CONV_LAYERS {
            s += &format!(" conv{} {}x{}x{}x{} s1 p1 relu;", l + 1, FILTERS, Self::conv_in(l), KERNEL, KERNEL);
        }
        s += &format!(" dense {}x{} relu; policy {}x{} softmax; value 1x{} linear", HIDDEN, self.flat_len(), NUM_ACTIONS, HIDDEN, HIDDEN);
        s
    }

    /// Stable 64-bit hash of [`NetShape::describe`], stored in checkpoints.
    pub fn hash(&self) -> u64 {
        seeding::tag(&self.describe())
    }
}

/// A flat parameter vector tagged with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams<T = f32> {
    shape: NetShape,
    flat: Vec<T>,
}

impl<T: Real> NetParams<T> {
    pub fn zeros(shape: NetShape) -> Self {
        NetParams { shape, flat: vec![T::zero(); shape.param_count()] }
    }

    pub fn from_flat(shape: NetShape, flat: Vec<T>) -> Result<Self, NetError> {
        let expected = shape.param_count();
        if flat.len() != expected {
            return Err(NetError::LengthMismatch { expected, got: flat.len() });
        }
        Ok(NetParams { shape, flat })
    }

    /// Glorot-uniform weights (variance 2 / (fan_in + fan_out)), zero biases.
    pub fn init(shape: NetShape, seed: u64) -> Self {
        let mut p = Self::zeros(shape);
        let layout = shape.layout();
        let mut rng = seeding::rng(seeding::derive(seed, seeding::tag("init_params")));
        let k2 = KERNEL * KERNEL;
        let mut fill = |range: Range<usize>, fan_in: usize, fan_out: usize, flat: &mut [T]| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut flat[range] {
                *w = T::of_f64(rng.gen_range(-a..a));
            }
        };
        for l in 0..CONV_LAYERS {
            fill(layout.conv_w[l].clone(), NetShape::conv_in(l) * k2, FILTERS * k2, &mut p.flat);
        }
        fill(layout.dense_w.clone(), shape.flat_len(), HIDDEN, &mut p.flat);
        fill(layout.policy_w.clone(), HIDDEN, NUM_ACTIONS, &mut p.flat);
        fill(layout.value_w.clone(), HIDDEN, 1, &mut p.flat);
        p
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[T] {
        &self.flat
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.flat.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams { shape: self.shape, flat: self.flat.iter().map(|v| U::of_f64(v.as_f64())).collect() }
    }
}

impl NetParams<f32> {
    /// Forward pass on an encoded observation.
    pub fn predict(&self, features: &FeatureTensor) -> Result<NetOutput, NetError> {
        Ok(forward(self, features.as_slice())?.output)
    }
}

/// Softmax policy and scalar value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetOutput<T = f32> {
    pub policy: [T; NUM_ACTIONS],
    pub value: T,
}

/// Gradient of a loss with respect to every parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T = f32> {
    flat: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros(len: usize) -> Self {
        Gradients { flat: vec![T::zero(); len] }
    }

    pub fn from_flat(flat: Vec<T>) -> Self {
        Gradients { flat }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.flat
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.flat
    }

    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.flat.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.flat.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt()
    }

    /// Rescales to `max_norm` when the global L2 norm exceeds it; returns the
    /// norm before clipping.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.norm();
        if norm > max_norm && norm.is_finite() {
            let s = T::of_f64(max_norm / norm);
            for v in &mut self.flat {
                *v *= s;
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_matches_shape_table() {
        // 4 conv layers, dense from 32·64, heads
        let expected = (32 * 28 * 9 + 32) + 3 * (32 * 32 * 9 + 32) + (128 * 32 * 64 + 128) + (6 * 128 + 6) + (128 + 1);
        assert_eq!(NetShape::new(8).param_count(), expected);
        assert_eq!(NetShape::new(8).param_count(), 299_015);
        assert_eq!(NetShape::new(6).param_count(), 299_015 - 128 * 32 * 28);
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let shape = NetShape::new(8);
        let a = NetParams::<f32>::init(shape, 3);
        let b = NetParams::<f32>::init(shape, 3);
        assert_eq!(a, b);
        assert_ne!(a, NetParams::<f32>::init(shape, 4));
        let l = shape.layout();
        for r in l.conv_b.iter().cloned().chain([l.dense_b, l.policy_b, l.value_b]) {
            assert!(a.as_slice()[r].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn init_variance_is_glorot() {
        let shape = NetShape::new(8);
        let p = NetParams::<f64>::init(shape, 11);
        let l = shape.layout();
        let k2 = 9;
        let mut layers = vec![(l.dense_w.clone(), shape.flat_len(), HIDDEN)];
        for i in 0..CONV_LAYERS {
            layers.push((l.conv_w[i].clone(), NetShape::conv_in(i) * k2, FILTERS * k2));
        }
        for (range, fan_in, fan_out) in layers {
            let w = &p.as_slice()[range];
            assert!(w.len() > 1000);
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
            let target = 2.0 / (fan_in + fan_out) as f64;
            assert!((var / target - 1.0).abs() < 0.2, "var {var} target {target}");
        }
    }

    #[test]
    fn shape_hash_depends_on_board() {
        assert_ne!(NetShape::new(6).hash(), NetShape::new(8).hash());
        assert_eq!(NetShape::new(8).hash(), NetShape::new(8).hash());
    }

    #[test]
    fn clipping_rescales_to_threshold() {
        let mut g = Gradients::from_flat(vec![30.0f64, 40.0]);
        assert_eq!(g.clip_norm(40.0), 50.0);
        assert!((g.norm() - 40.0).abs() < 1e-12);
        let mut h = Gradients::from_flat(vec![3.0f64, 4.0]);
        h.clip_norm(40.0);
        assert_eq!(h.as_slice(), &[3.0, 4.0]);
    }
}
