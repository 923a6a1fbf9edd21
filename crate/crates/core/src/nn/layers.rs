//! Float forward and backward passes of the individual layers.
//!
//! Activations are `[h, w, c]` row-major tensors (or flat vectors after
//! `Flatten`); convolution weights are `[c_out, kh, kw, c_in]` and dense
//! weights `[n_out, n_in]`. Backward functions take the layer's input, its
//! post-activation output, and the gradient w.r.t. that output, and return
//! weight/bias/input gradients.

use super::{Activation, Conv2DSpec, DenseSpec, Padding};
use crate::tensor::Tensor;

#[inline]
fn apply_activation(v: f64, act: Activation) -> f64 {
    match act {
        Activation::None => v,
        Activation::Relu => v.max(0.0),
    }
}

/// Derivative of the activation expressed through the post-activation value.
/// For ReLU, `out > 0` identifies the pass-through region.
#[inline]
fn activation_grad(out: f64, act: Activation) -> f64 {
    match act {
        Activation::None => 1.0,
        Activation::Relu => {
            if out > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Top/left padding for the configured padding mode (TF convention: total
/// padding `max((out-1)·stride + k - in, 0)`, extra pixel on the far side).
pub(crate) fn pad_before(input: usize, k: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => 0,
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(input);
            total / 2
        }
    }
}

pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &[f64], spec: &Conv2DSpec) -> Tensor {
    let (h, wd, c_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    assert_eq!(c_in, spec.c_in, "channel mismatch");
    let (out_h, out_w) = match spec.padding {
        Padding::Same => (h.div_ceil(spec.stride), wd.div_ceil(spec.stride)),
        Padding::Valid => (
            (h - spec.kh) / spec.stride + 1,
            (wd - spec.kw) / spec.stride + 1,
        ),
    };
    let pad_h = pad_before(h, spec.kh, spec.stride, spec.padding);
    let pad_w = pad_before(wd, spec.kw, spec.stride, spec.padding);

    let xd = x.data();
    let wd_ = w.data();
    let mut out = Tensor::zeros(&[out_h, out_w, spec.c_out]);
    let od = out.data_mut();
    for oh in 0..out_h {
        for ow in 0..out_w {
            let base_h = (oh * spec.stride) as isize - pad_h as isize;
            let base_w = (ow * spec.stride) as isize - pad_w as isize;
            for oc in 0..spec.c_out {
                let mut acc = b[oc];
                let w_base = oc * spec.kh * spec.kw * spec.c_in;
                for dh in 0..spec.kh {
                    let ih = base_h + dh as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for dw in 0..spec.kw {
                        let iw = base_w + dw as isize;
                        if iw < 0 || iw >= wd as isize {
                            continue;
                        }
                        let x_off = (ih as usize * wd + iw as usize) * c_in;
                        let w_off = w_base + (dh * spec.kw + dw) * spec.c_in;
                        for ic in 0..c_in {
                            acc += xd[x_off + ic] * wd_[w_off + ic];
                        }
                    }
                }
                od[(oh * out_w + ow) * spec.c_out + oc] = apply_activation(acc, spec.activation);
            }
        }
    }
    out
}

/// Gradients of a convolution layer. `out` is the forward result (post
/// activation) and `grad_out` the loss gradient w.r.t. it.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    out: &Tensor,
    grad_out: &Tensor,
    spec: &Conv2DSpec,
) -> (Tensor, Vec<f64>, Tensor) {
    let (h, wd, c_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (out_h, out_w) = (out.shape()[0], out.shape()[1]);
    let pad_h = pad_before(h, spec.kh, spec.stride, spec.padding);
    let pad_w = pad_before(wd, spec.kw, spec.stride, spec.padding);

    let xd = x.data();
    let wd_ = w.data();
    let od = out.data();
    let gd = grad_out.data();

    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = vec![0.0; spec.c_out];
    let mut grad_x = Tensor::zeros(x.shape());
    let gw = grad_w.data_mut();
    let gx = grad_x.data_mut();

    for oh in 0..out_h {
        for ow in 0..out_w {
            let base_h = (oh * spec.stride) as isize - pad_h as isize;
            let base_w = (ow * spec.stride) as isize - pad_w as isize;
            for oc in 0..spec.c_out {
                let o_idx = (oh * out_w + ow) * spec.c_out + oc;
                let g = gd[o_idx] * activation_grad(od[o_idx], spec.activation);
                if g == 0.0 {
                    continue;
                }
                grad_b[oc] += g;
                let w_base = oc * spec.kh * spec.kw * spec.c_in;
                for dh in 0..spec.kh {
                    let ih = base_h + dh as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for dw in 0..spec.kw {
                        let iw = base_w + dw as isize;
                        if iw < 0 || iw >= wd as isize {
                            continue;
                        }
                        let x_off = (ih as usize * wd + iw as usize) * c_in;
                        let w_off = w_base + (dh * spec.kw + dw) * spec.c_in;
                        for ic in 0..c_in {
                            gw[w_off + ic] += g * xd[x_off + ic];
                            gx[x_off + ic] += g * wd_[w_off + ic];
                        }
                    }
                }
            }
        }
    }
    (grad_w, grad_b, grad_x)
}

pub fn dense_forward(x: &Tensor, w: &Tensor, b: &[f64], spec: &DenseSpec) -> Tensor {
    assert_eq!(x.len(), spec.n_in, "dense input size mismatch");
    let xd = x.data();
    let wd = w.data();
    let mut out = vec![0.0; spec.n_out];
    for (o, slot) in out.iter_mut().enumerate() {
        let mut acc = b[o];
        let row = &wd[o * spec.n_in..(o + 1) * spec.n_in];
        for (v, wv) in xd.iter().zip(row) {
            acc += v * wv;
        }
        *slot = apply_activation(acc, spec.activation);
    }
    Tensor::from_vec(&[spec.n_out], out)
}

pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    out: &Tensor,
    grad_out: &Tensor,
    spec: &DenseSpec,
) -> (Tensor, Vec<f64>, Tensor) {
    let xd = x.data();
    let wd = w.data();
    let od = out.data();
    let gd = grad_out.data();

    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = vec![0.0; spec.n_out];
    let mut grad_x = Tensor::zeros(x.shape());
    let gw = grad_w.data_mut();
    let gx = grad_x.data_mut();

    for o in 0..spec.n_out {
        let g = gd[o] * activation_grad(od[o], spec.activation);
        if g == 0.0 {
            continue;
        }
        grad_b[o] += g;
        let row = o * spec.n_in;
        for i in 0..spec.n_in {
            gw[row + i] += g * xd[i];
            gx[i] += g * wd[row + i];
        }
    }
    (grad_w, grad_b, grad_x)
}

pub fn avg_pool2d_forward(x: &Tensor, ph: usize, pw: usize) -> Tensor {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h / ph, w / pw);
    let norm = 1.0 / (ph * pw) as f64;
    let mut out = Tensor::zeros(&[oh, ow, c]);
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut acc = 0.0;
                for di in 0..ph {
                    for dj in 0..pw {
                        acc += x.at3(i * ph + di, j * pw + dj, ch);
                    }
                }
                out.set3(i, j, ch, acc * norm);
            }
        }
    }
    out
}

pub fn avg_pool2d_backward(x: &Tensor, grad_out: &Tensor, ph: usize, pw: usize) -> Tensor {
    let (oh, ow, c) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let norm = 1.0 / (ph * pw) as f64;
    let mut grad_x = Tensor::zeros(x.shape());
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let g = grad_out.at3(i, j, ch) * norm;
                for di in 0..ph {
                    for dj in 0..pw {
                        let idx = grad_x.idx3(i * ph + di, j * pw + dj, ch);
                        grad_x.data_mut()[idx] += g;
                    }
                }
            }
        }
    }
    grad_x
}

pub fn max_pool2d_forward(x: &Tensor, ph: usize, pw: usize) -> Tensor {
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h / ph, w / pw);
    let mut out = Tensor::zeros(&[oh, ow, c]);
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                for di in 0..ph {
                    for dj in 0..pw {
                        best = best.max(x.at3(i * ph + di, j * pw + dj, ch));
                    }
                }
                out.set3(i, j, ch, best);
            }
        }
    }
    out
}

/// Gradient routes to the first maximum of each window (deterministic ties).
pub fn max_pool2d_backward(x: &Tensor, grad_out: &Tensor, ph: usize, pw: usize) -> Tensor {
    let (oh, ow, c) = (
        grad_out.shape()[0],
        grad_out.shape()[1],
        grad_out.shape()[2],
    );
    let mut grad_x = Tensor::zeros(x.shape());
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = (0, 0);
                for di in 0..ph {
                    for dj in 0..pw {
                        let v = x.at3(i * ph + di, j * pw + dj, ch);
                        if v > best {
                            best = v;
                            best_idx = (i * ph + di, j * pw + dj);
                        }
                    }
                }
                let idx = grad_x.idx3(best_idx.0, best_idx.1, ch);
                grad_x.data_mut()[idx] += grad_out.at3(i, j, ch);
            }
        }
    }
    grad_x
}

pub fn flatten_forward(x: &Tensor) -> Tensor {
    x.clone().reshape(&[x.len()])
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::reference;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor::from_vec(shape, data)
    }

    #[test]
    fn identity_impulse_kernel_preserves_input() {
        // 3x3 kernel with a centered 1 on the matching channel, same padding,
        // no activation: the layer must copy its input.
        let c = 3usize;
        let spec = Conv2DSpec {
            kh: 3,
            kw: 3,
            c_in: c,
            c_out: c,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::None,
        };
        let mut w = Tensor::zeros(&[c, 3, 3, c]);
        for ch in 0..c {
            let idx = ((ch * 3 + 1) * 3 + 1) * c + ch; // [ch][1][1][ch]
            w.data_mut()[idx] = 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, &[4, 65, c]);
        let out = conv2d_forward(&x, &w, &vec![0.0; c], &spec);
        assert_eq!(out.shape(), x.shape());
        for (a, b) in out.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for case in 0..20 {
            let c_in = rng.random_range(1..4);
            let c_out = rng.random_range(1..5);
            let kh = [1, 3, 5][rng.random_range(0..3)];
            let kw = [1, 3][rng.random_range(0..2)];
            let h = rng.random_range(kh..9);
            let w = rng.random_range(kw..9);
            let padding = if rng.random_bool(0.5) {
                Padding::Same
            } else {
                Padding::Valid
            };
            let activation = if rng.random_bool(0.5) {
                Activation::Relu
            } else {
                Activation::None
            };
            let spec = Conv2DSpec {
                kh,
                kw,
                c_in,
                c_out,
                stride: 1,
                padding,
                activation,
            };
            let x = random_tensor(&mut rng, &[h, w, c_in]);
            let wt = random_tensor(&mut rng, &[c_out, kh, kw, c_in]);
            let b: Vec<f64> = (0..c_out).map(|_| rng.random_range(-0.5..0.5)).collect();
            let fast = conv2d_forward(&x, &wt, &b, &spec);
            let slow = reference::naive_conv2d(&x, &wt, &b, &spec);
            assert_eq!(fast.shape(), slow.shape(), "case {case}");
            for (a, o) in fast.data().iter().zip(slow.data()) {
                assert!((a - o).abs() < 1e-5, "case {case}: {a} vs {o}");
            }
        }
    }

    #[test]
    fn dense_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n_in = rng.random_range(1..32);
            let n_out = rng.random_range(1..16);
            let spec = DenseSpec {
                n_in,
                n_out,
                activation: Activation::Relu,
            };
            let x = random_tensor(&mut rng, &[n_in]);
            let w = random_tensor(&mut rng, &[n_out, n_in]);
            let b: Vec<f64> = (0..n_out).map(|_| rng.random_range(-0.5..0.5)).collect();
            let fast = dense_forward(&x, &w, &b, &spec);
            let slow = reference::naive_dense(&x, &w, &b, &spec);
            for (a, o) in fast.data().iter().zip(slow.data()) {
                assert!((a - o).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..rng.random_range(2..6))
                .map(|_| rng.random_range(-50.0..50.0))
                .collect();
            let p = softmax(&logits);
            assert!(p.iter().all(|&v| v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn avg_pool_drops_partial_edges() {
        let x = Tensor::from_vec(&[2, 5, 1], (0..10).map(|v| v as f64).collect());
        let out = avg_pool2d_forward(&x, 2, 2);
        assert_eq!(out.shape(), &[1, 2, 1]);
        // Windows: {0,1,5,6} and {2,3,7,8}; column 4/9 dropped.
        assert_eq!(out.data(), &[3.0, 5.0]);
    }

    #[test]
    fn max_pool_takes_window_maximum() {
        let x = Tensor::from_vec(&[2, 2, 1], vec![1.0, -4.0, 9.0, 2.0]);
        let out = max_pool2d_forward(&x, 2, 2);
        assert_eq!(out.data(), &[9.0]);
    }
}
