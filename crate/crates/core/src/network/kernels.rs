//! Forward and backward passes.

use super::{Layout, NetError, NetOutput, NetParams, NetShape, Real, CONV_LAYERS, FILTERS, HIDDEN, KERNEL};
use crate::env::NUM_ACTIONS;

const K2: usize = KERNEL * KERNEL;

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct Activations<T = f32> {
    /// im2col matrices feeding each conv layer, `[in·9][cells]`.
    cols: Vec<Vec<T>>,
    /// Post-ReLU conv outputs, `[FILTERS][cells]`.
    conv_out: Vec<Vec<T>>,
    /// Post-ReLU dense output.
    hidden: Vec<T>,
    pub logits: [T; NUM_ACTIONS],
    pub output: NetOutput<T>,
}

impl<T: Real> Activations<T> {
    /// Which ReLU units are active, conv layers first then the dense layer.
    pub fn active_units(&self) -> impl Iterator<Item = bool> + '_ {
        self.conv_out.iter().flatten().chain(&self.hidden).map(|v| *v > T::zero())
    }
}

/// Runs the network on one channel-major input of `28 × size × size` values.
pub fn forward<T: Real>(params: &NetParams<T>, input: &[T]) -> Result<Activations<T>, NetError> {
    let shape = params.shape();
    if input.len() != shape.input_len() {
        return Err(NetError::InputShape { expected: shape.input_len(), got: input.len() });
    }
    if let Some(i) = input.iter().position(|v| !v.is_finite()) {
        return Err(NetError::NonFiniteInput(i));
    }
    let layout = shape.layout();
    let w = params.as_slice();
    let n = shape.board_size;
    let cells = n * n;

    let mut cols = Vec::with_capacity(CONV_LAYERS);
    let mut conv_out: Vec<Vec<T>> = Vec::with_capacity(CONV_LAYERS);
    for l in 0..CONV_LAYERS {
        let src = if l == 0 { input } else { &conv_out[l - 1] };
        let c = im2col(src, NetShape::conv_in(l), n);
        let weights = &w[layout.conv_w[l].clone()];
        let bias = &w[layout.conv_b[l].clone()];
        let rows = NetShape::conv_in(l) * K2;
        let mut out = vec![T::zero(); FILTERS * cells];
        for f in 0..FILTERS {
            let o = &mut out[f * cells..(f + 1) * cells];
            o.fill(bias[f]);
            let wf = &weights[f * rows..(f + 1) * rows];
            for (k, &wk) in wf.iter().enumerate() {
                if wk != T::zero() {
                    axpy(wk, &c[k * cells..(k + 1) * cells], o);
                }
            }
        }
        relu(&mut out);
        cols.push(c);
        conv_out.push(out);
    }

    let flat = &conv_out[CONV_LAYERS - 1];
    let dense_w = &w[layout.dense_w.clone()];
    let dense_b = &w[layout.dense_b.clone()];
    let width = shape.flat_len();
    let mut hidden: Vec<T> = (0..HIDDEN).map(|j| dense_b[j] + dot(&dense_w[j * width..(j + 1) * width], flat)).collect();
    relu(&mut hidden);

    let pw = &w[layout.policy_w.clone()];
    let pb = &w[layout.policy_b.clone()];
    let mut logits = [T::zero(); NUM_ACTIONS];
    for (a, z) in logits.iter_mut().enumerate() {
        *z = pb[a] + dot(&pw[a * HIDDEN..(a + 1) * HIDDEN], &hidden);
    }
    let value = w[layout.value_b.start] + dot(&w[layout.value_w.clone()], &hidden);
    let output = NetOutput { policy: softmax(&logits), value };
    Ok(Activations { cols, conv_out, hidden, logits, output })
}

/// Accumulates into `grads` the parameter gradient given the loss gradient
/// with respect to the policy logits and the value output.
pub fn backward<T: Real>(
    params: &NetParams<T>,
    acts: &Activations<T>,
    d_logits: &[T; NUM_ACTIONS],
    d_value: T,
    grads: &mut [T],
) -> Result<(), NetError> {
    let shape = params.shape();
    let layout: Layout = shape.layout();
    if grads.len() != layout.total {
        return Err(NetError::LengthMismatch { expected: layout.total, got: grads.len() });
    }
    let w = params.as_slice();
    let n = shape.board_size;
    let cells = n * n;
    let h = &acts.hidden;

    // Heads.
    let mut dh = vec![T::zero(); HIDDEN];
    let pw = &w[layout.policy_w.clone()];
    for a in 0..NUM_ACTIONS {
        let g = d_logits[a];
        grads[layout.policy_b.start + a] += g;
        if g != T::zero() {
            let row = layout.policy_w.start + a * HIDDEN;
            axpy(g, h, &mut grads[row..row + HIDDEN]);
            axpy(g, &pw[a * HIDDEN..(a + 1) * HIDDEN], &mut dh);
        }
    }
    grads[layout.value_b.start] += d_value;
    if d_value != T::zero() {
        axpy(d_value, h, &mut grads[layout.value_w.clone()]);
        axpy(d_value, &w[layout.value_w.clone()], &mut dh);
    }

    // Dense.
    let width = shape.flat_len();
    let flat = &acts.conv_out[CONV_LAYERS - 1];
    let dense_w = &w[layout.dense_w.clone()];
    let mut d_flat = vec![T::zero(); width];
    for j in 0..HIDDEN {
        let g = if h[j] > T::zero() { dh[j] } else { T::zero() };
        if g == T::zero() {
            continue;
        }
        grads[layout.dense_b.start + j] += g;
        let row = layout.dense_w.start + j * width;
        axpy(g, flat, &mut grads[row..row + width]);
        axpy(g, &dense_w[j * width..(j + 1) * width], &mut d_flat);
    }

    // Convolutions, last to first.
    let mut d_out = d_flat;
    for l in (0..CONV_LAYERS).rev() {
        let out = &acts.conv_out[l];
        for (d, &o) in d_out.iter_mut().zip(out) {
            if o <= T::zero() {
                *d = T::zero();
            }
        }
        let c = &acts.cols[l];
        let rows = NetShape::conv_in(l) * K2;
        let weights = &w[layout.conv_w[l].clone()];
        let mut d_cols = if l > 0 { vec![T::zero(); rows * cells] } else { Vec::new() };
        for f in 0..FILTERS {
            let df = &d_out[f * cells..(f + 1) * cells];
            grads[layout.conv_b[l].start + f] += df.iter().copied().sum::<T>();
            let gw = layout.conv_w[l].start + f * rows;
            for k in 0..rows {
                grads[gw + k] += dot(df, &c[k * cells..(k + 1) * cells]);
            }
            if l > 0 {
                for k in 0..rows {
                    let wk = weights[f * rows + k];
                    if wk != T::zero() {
                        axpy(wk, df, &mut d_cols[k * cells..(k + 1) * cells]);
                    }
                }
            }
        }
        if l > 0 {
            d_out = col2im(&d_cols, NetShape::conv_in(l), n);
        }
    }
    Ok(())
}

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T; NUM_ACTIONS]) -> [T; NUM_ACTIONS] {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut p = [T::zero(); NUM_ACTIONS];
    let mut sum = T::zero();
    for (q, &z) in p.iter_mut().zip(logits) {
        *q = (z - max).exp();
        sum += *q;
    }
    for q in &mut p {
        *q = *q / sum;
    }
    p
}

fn relu<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Eight independent accumulators so the loop vectorizes.
#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: T = ca.remainder().iter().zip(cb.remainder()).map(|(&x, &y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().copied().sum::<T>() + tail
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `[c][n][n]` → `[c·9][n·n]` for a 3×3 kernel with one cell of zero padding.
fn im2col<T: Real>(src: &[T], channels: usize, n: usize) -> Vec<T> {
    let cells = n * n;
    let mut out = vec![T::zero(); channels * K2 * cells];
    for c in 0..channels {
        let plane = &src[c * cells..(c + 1) * cells];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut out[(c * K2 + ky * KERNEL + kx) * cells..][..cells];
                for y in 0..n {
                    let sy = y + ky;
                    if sy < 1 || sy > n {
                        continue;
                    }
                    let src_row = &plane[(sy - 1) * n..sy * n];
                    let dst = &mut row[y * n..(y + 1) * n];
                    for x in 0..n {
                        let sx = x + kx;
                        if sx >= 1 && sx <= n {
                            dst[x] = src_row[sx - 1];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Adjoint of [`im2col`].
fn col2im<T: Real>(cols: &[T], channels: usize, n: usize) -> Vec<T> {
    let cells = n * n;
    let mut out = vec![T::zero(); channels * cells];
    for c in 0..channels {
        let plane = &mut out[c * cells..(c + 1) * cells];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[(c * K2 + ky * KERNEL + kx) * cells..][..cells];
                for y in 0..n {
                    let sy = y + ky;
                    if sy < 1 || sy > n {
                        continue;
                    }
                    for x in 0..n {
                        let sx = x + kx;
                        if sx >= 1 && sx <= n {
                            plane[(sy - 1) * n + sx - 1] += row[y * n + x];
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform_policy() {
        let shape = NetShape::new(8);
        let p = NetParams::<f32>::zeros(shape);
        let out = forward(&p, &vec![0.0; shape.input_len()]).unwrap().output;
        for q in out.policy {
            assert!((q - 1.0 / 6.0).abs() < 1e-7);
        }
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = NetParams::<f32>::zeros(NetShape::new(6));
        assert!(matches!(forward(&p, &[0.0; 10]), Err(NetError::InputShape { .. })));
        let mut x = vec![0.0; p.shape().input_len()];
        x[17] = f32::NAN;
        assert_eq!(forward(&p, &x).unwrap_err(), NetError::NonFiniteInput(17));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // <im2col(x), y> == <x, col2im(y)>
        let n = 5;
        let c = 3;
        let x: Vec<f64> = (0..c * n * n).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let y: Vec<f64> = (0..c * 9 * n * n).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let lhs: f64 = im2col(&x, c, n).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(col2im(&y, c, n)).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..19).map(|i| i as f64).collect();
        let expected: f64 = a.iter().map(|x| x * x).sum();
        assert_eq!(dot(&a, &a), expected);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let p = softmax(&[1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let q = softmax(&[1001.0f64, 1002.0, 1003.0, 1004.0, 1005.0, 1006.0]);
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
