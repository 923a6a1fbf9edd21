//! Definition-level layer oracles.
//!
//! Written independently of the fast path: padding is materialized into an
//! explicit zero-padded buffer and the convolution is evaluated as the plain
//! sliding-window sum. Used by unit tests and acceptance checks only.

use super::layers::pad_before;
use super::{Activation, Conv2DSpec, DenseSpec, Padding};
use crate::tensor::Tensor;

fn act(v: f64, a: Activation) -> f64 {
    match a {
        Activation::None => v,
        Activation::Relu => {
            if v > 0.0 {
                v
            } else {
                0.0
            }
        }
    }
}

/// Sliding-window convolution over an explicitly zero-padded input.
pub fn naive_conv2d(x: &Tensor, w: &Tensor, b: &[f64], spec: &Conv2DSpec) -> Tensor {
    let (h, wd, c_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let pad_h = pad_before(h, spec.kh, spec.stride, spec.padding);
    let pad_w = pad_before(wd, spec.kw, spec.stride, spec.padding);
    let (out_h, out_w) = match spec.padding {
        Padding::Same => (h.div_ceil(spec.stride), wd.div_ceil(spec.stride)),
        Padding::Valid => (
            (h - spec.kh) / spec.stride + 1,
            (wd - spec.kw) / spec.stride + 1,
        ),
    };

    // Materialize the padded input.
    let ph = h + spec.kh;
    let pw = wd + spec.kw;
    let mut padded = Tensor::zeros(&[ph, pw, c_in]);
    for i in 0..h {
        for j in 0..wd {
            for c in 0..c_in {
                padded.set3(i + pad_h, j + pad_w, c, x.at3(i, j, c));
            }
        }
    }

    let mut out = Tensor::zeros(&[out_h, out_w, spec.c_out]);
    for oh in 0..out_h {
        for ow in 0..out_w {
            for oc in 0..spec.c_out {
                let mut acc = b[oc];
                for dh in 0..spec.kh {
                    for dw in 0..spec.kw {
                        for ic in 0..c_in {
                            let w_idx = ((oc * spec.kh + dh) * spec.kw + dw) * spec.c_in + ic;
                            acc += padded.at3(oh * spec.stride + dh, ow * spec.stride + dw, ic)
                                * w.data()[w_idx];
                        }
                    }
                }
                out.set3(oh, ow, oc, act(acc, spec.activation));
            }
        }
    }
    out
}

/// Matrix-vector product straight from the definition.
pub fn naive_dense(x: &Tensor, w: &Tensor, b: &[f64], spec: &DenseSpec) -> Tensor {
    let mut out = vec![0.0; spec.n_out];
    for (o, slot) in out.iter_mut().enumerate() {
        let mut acc = b[o];
        for i in 0..spec.n_in {
            acc += w.data()[o * spec.n_in + i] * x.data()[i];
        }
        *slot = act(acc, spec.activation);
    }
    Tensor::from_vec(&[spec.n_out], out)
}
