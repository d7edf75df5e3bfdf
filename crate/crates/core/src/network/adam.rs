use serde::{Deserialize, Serialize};

use super::{Gradients, NetError, NetParams, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 penalty: `weight_decay · w` is added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-5, weight_decay: 1e-5 }
    }
}

/// Adam moments and step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState { config, m: vec![T::zero(); len], v: vec![T::zero(); len], step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[T] {
        &self.m
    }

    pub fn second_moment(&self) -> &[T] {
        &self.v
    }

    /// One bias-corrected update:
    /// `w ← w − lr · m̂ / (√v̂ + eps)` with `g ← g + weight_decay · w`.
    pub fn step(&mut self, params: &mut NetParams<T>, grads: &Gradients<T>) -> Result<(), NetError> {
        self.step_slice(params.as_mut_slice(), grads.as_slice())
    }

    pub fn step_slice(&mut self, w: &mut [T], g: &[T]) -> Result<(), NetError> {
        if w.len() != self.m.len() {
            return Err(NetError::LengthMismatch { expected: self.m.len(), got: w.len() });
        }
        if g.len() != w.len() {
            return Err(NetError::LengthMismatch { expected: w.len(), got: g.len() });
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::of_f64(c.beta1);
        let b2 = T::of_f64(c.beta2);
        let one_b1 = T::of_f64(1.0 - c.beta1);
        let one_b2 = T::of_f64(1.0 - c.beta2);
        let wd = T::of_f64(c.weight_decay);
        let m_corr = T::of_f64(1.0 / (1.0 - c.beta1.powi(t)));
        let v_corr = T::of_f64(1.0 / (1.0 - c.beta2.powi(t)));
        let lr = T::of_f64(c.lr);
        let eps = T::of_f64(c.eps);
        for i in 0..w.len() {
            let gi = g[i] + wd * w[i];
            self.m[i] = b1 * self.m[i] + one_b1 * gi;
            self.v[i] = b2 * self.v[i] + one_b2 * gi * gi;
            let m_hat = self.m[i] * m_corr;
            let v_hat = self.v[i] * v_corr;
            w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
