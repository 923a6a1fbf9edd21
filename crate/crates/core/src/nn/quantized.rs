//! Post-training INT8 conversion and integer-only inference.
//!
//! Weights are quantized symmetrically per tensor; the input and every
//! activation tensor get asymmetric parameters calibrated from sampled
//! training data. Inference runs 8-bit × 8-bit multiplies into 32-bit
//! accumulators, rescaled to the next activation grid with a fixed-point
//! multiplier and right shift — no floating point on the data path.

use super::{LayerSpec, ModelArtifact, PARAM_BUDGET_BYTES};
use crate::error::{Error, Result};
use crate::quant::{self, QuantParams, QuantTensor, RangeTracker, Requantizer, QMAX, QMIN};
use crate::signals::Label;
use crate::tensor::Tensor;

/// Cap on quantized bias magnitude so `taps·127·255 + bias` stays in i32.
pub(crate) const BIAS_MAGNITUDE_LIMIT: i64 = 1 << 30;

/// Quantization info of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantLayerInfo {
    /// Conv/Dense: symmetric weight params, INT8 weights, INT32 biases at
    /// `input_scale * weight_scale`, and the output activation grid.
    Weighted {
        weights: QuantParams,
        q_weights: Vec<i8>,
        q_bias: Vec<i32>,
        output: QuantParams,
    },
    /// Pool/Flatten/Softmax: output reuses the input grid.
    Passthrough { output: QuantParams },
}

impl QuantLayerInfo {
    pub fn output(&self) -> QuantParams {
        match self {
            QuantLayerInfo::Weighted { output, .. } => *output,
            QuantLayerInfo::Passthrough { output } => *output,
        }
    }
}

/// Quantization tables for a whole model.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub input: QuantParams,
    pub layers: Vec<QuantLayerInfo>,
}

/// Total INT8 parameter bytes actually stored (1 per weight, 4 per bias).
impl QuantizedModel {
    pub fn param_bytes(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                QuantLayerInfo::Weighted {
                    q_weights, q_bias, ..
                } => q_weights.len() + 4 * q_bias.len(),
                QuantLayerInfo::Passthrough { .. } => 0,
            })
            .sum()
    }
}

/// Populate the model's quantized view from calibration feature maps.
///
/// Calibration runs the float forward pass over every provided input and
/// tracks per-tensor activation ranges; the paper's flow samples these
/// inputs randomly from the training set.
pub fn quantize_model(model: &mut ModelArtifact, calib: &[Tensor]) -> Result<()> {
    if calib.is_empty() {
        return Err(Error::EmptyInput("calibration set"));
    }
    if model.weights.iter().zip(&model.layers).any(|(w, l)| {
        l.is_trainable() && w.is_none()
    }) {
        return Err(Error::InvalidConfig(
            "float weights missing; train before quantizing".into(),
        ));
    }

    // Input range over all calibration tensors.
    let mut input_tracker = RangeTracker::new();
    for x in calib {
        input_tracker.observe(x.data())?;
    }
    let input_params = input_tracker.params(false)?;

    // Per-layer activation ranges from float forward passes.
    let mut trackers: Vec<RangeTracker> = model.layers.iter().map(|_| RangeTracker::new()).collect();
    for x in calib {
        let outputs = model.forward_all(x)?;
        for (tracker, out) in trackers.iter_mut().zip(&outputs) {
            tracker.observe(out.data())?;
        }
    }

    let mut layers_info = Vec::with_capacity(model.layers.len());
    let mut in_params = input_params;
    for (i, layer) in model.layers.iter().enumerate() {
        if layer.is_trainable() {
            let lw = model.weights[i].as_ref().expect("checked above");
            let w_params = quant::calibrate(lw.w.data(), true)?;
            let q_weights = quant::quantize(&lw.w, w_params)?.values;
            let bias_scale = in_params.scale * w_params.scale;
            let mut q_bias = Vec::with_capacity(lw.b.len());
            for &b in &lw.b {
                let q = (b / bias_scale).round() as i64;
                if q.abs() > BIAS_MAGNITUDE_LIMIT {
                    return Err(Error::InvalidConfig(format!(
                        "quantized bias {q} exceeds accumulator headroom"
                    )));
                }
                q_bias.push(q as i32);
            }
            let output = trackers[i].params(false)?;
            layers_info.push(QuantLayerInfo::Weighted {
                weights: w_params,
                q_weights,
                q_bias,
                output,
            });
            in_params = output;
        } else {
            // Average pooling and flatten preserve the input grid exactly;
            // softmax is bypassed in the integer path.
            layers_info.push(QuantLayerInfo::Passthrough { output: in_params });
        }
    }

    let quantized = QuantizedModel {
        input: input_params,
        layers: layers_info,
    };
    let bytes = quantized.param_bytes();
    if bytes > PARAM_BUDGET_BYTES {
        return Err(Error::BudgetExceeded {
            bytes,
            budget: PARAM_BUDGET_BYTES,
        });
    }
    model.set_metadata("param_bytes", bytes);
    model.set_metadata("calibration_samples", calib.len());
    model.quant = Some(quantized);
    Ok(())
}

/// Quantize a float CNN input with the model's input parameters.
pub fn quantize_input(model: &ModelArtifact, x: &Tensor) -> Result<QuantTensor> {
    let q = model.quant.as_ref().ok_or(Error::NotQuantized)?;
    quant::quantize(x, q.input)
}

/// Result of an integer forward pass: predicted class and the final layer's
/// integer-domain accumulator scores.
#[derive(Debug, Clone, PartialEq)]
pub struct IntInference {
    pub class: usize,
    pub scores: Vec<i32>,
}

#[inline]
fn round_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    if a >= 0 {
        (a + b / 2) / b
    } else {
        -((-a + b / 2) / b)
    }
}

/// Integer-only forward pass.
///
/// All convolution and dense arithmetic is 8-bit × 8-bit with 32-bit
/// accumulation, requantized per layer. The returned scores are the last
/// weighted layer's raw accumulators (a positive rescale of the float
/// logits), so the argmax matches the float path up to quantization error.
pub fn forward_int8(model: &ModelArtifact, input: &QuantTensor) -> Result<IntInference> {
    forward_int8_impl(model, input, None)
}

/// [`forward_int8`] that also returns every layer's quantized output.
pub fn forward_int8_trace(
    model: &ModelArtifact,
    input: &QuantTensor,
) -> Result<(IntInference, Vec<QuantTensor>)> {
    let mut trace = Vec::with_capacity(model.layers.len());
    let inference = forward_int8_impl(model, input, Some(&mut trace))?;
    Ok((inference, trace))
}

fn forward_int8_impl(
    model: &ModelArtifact,
    input: &QuantTensor,
    mut trace: Option<&mut Vec<QuantTensor>>,
) -> Result<IntInference> {
    let qm = model.quant.as_ref().ok_or(Error::NotQuantized)?;
    if input.shape != model.input_shape.as_slice() {
        return Err(Error::shape(
            format!(
                "{}x{}x{}",
                model.input_shape[0], model.input_shape[1], model.input_shape[2]
            ),
            format!("{:?}", input.shape),
        ));
    }

    let mut act = input.values.clone();
    let mut act_shape: Vec<usize> = input.shape.clone();
    let mut act_params = input.params;
    let mut last_scores: Option<Vec<i32>> = None;

    for (i, layer) in model.layers.iter().enumerate() {
        let info = &qm.layers[i];
        match (*layer, info) {
            (
                LayerSpec::Conv2D(spec),
                QuantLayerInfo::Weighted {
                    weights,
                    q_weights,
                    q_bias,
                    output,
                },
            ) => {
                let (h, w) = (act_shape[0], act_shape[1]);
                let (out_h, out_w) = match spec.padding {
                    super::Padding::Same => (h.div_ceil(spec.stride), w.div_ceil(spec.stride)),
                    super::Padding::Valid => (
                        (h - spec.kh) / spec.stride + 1,
                        (w - spec.kw) / spec.stride + 1,
                    ),
                };
                let pad_h = super::layers::pad_before(h, spec.kh, spec.stride, spec.padding);
                let pad_w = super::layers::pad_before(w, spec.kw, spec.stride, spec.padding);
                let rq = Requantizer::from_real(
                    act_params.scale * weights.scale / output.scale,
                )?;
                let zp_in = act_params.zero_point;
                let zp_out = output.zero_point;
                let mut next = vec![0i8; out_h * out_w * spec.c_out];
                let mut scores = vec![0i32; next.len()];
                for oh in 0..out_h {
                    for ow in 0..out_w {
                        let base_h = (oh * spec.stride) as isize - pad_h as isize;
                        let base_w = (ow * spec.stride) as isize - pad_w as isize;
                        for oc in 0..spec.c_out {
                            let mut acc: i32 = q_bias[oc];
                            let w_base = oc * spec.kh * spec.kw * spec.c_in;
                            for dh in 0..spec.kh {
                                let ih = base_h + dh as isize;
                                if ih < 0 || ih >= h as isize {
                                    continue;
                                }
                                for dw in 0..spec.kw {
                                    let iw = base_w + dw as isize;
                                    if iw < 0 || iw >= w as isize {
                                        continue;
                                    }
                                    let x_off = (ih as usize * w + iw as usize) * spec.c_in;
                                    let w_off = w_base + (dh * spec.kw + dw) * spec.c_in;
                                    for ic in 0..spec.c_in {
                                        let xv = act[x_off + ic] as i32 - zp_in;
                                        let wv = q_weights[w_off + ic] as i32;
                                        acc += xv * wv;
                                    }
                                }
                            }
                            let o_idx = (oh * out_w + ow) * spec.c_out + oc;
                            scores[o_idx] = acc;
                            let mut q = rq.apply(acc) + zp_out;
                            if spec.activation == super::Activation::Relu {
                                q = q.max(zp_out);
                            }
                            next[o_idx] = q.clamp(QMIN, QMAX) as i8;
                        }
                    }
                }
                act = next;
                act_shape = vec![out_h, out_w, spec.c_out];
                act_params = *output;
                last_scores = Some(scores);
            }
            (
                LayerSpec::Dense(spec),
                QuantLayerInfo::Weighted {
                    weights,
                    q_weights,
                    q_bias,
                    output,
                },
            ) => {
                let rq = Requantizer::from_real(
                    act_params.scale * weights.scale / output.scale,
                )?;
                let zp_in = act_params.zero_point;
                let zp_out = output.zero_point;
                let mut next = vec![0i8; spec.n_out];
                let mut scores = vec![0i32; spec.n_out];
                for o in 0..spec.n_out {
                    let mut acc: i32 = q_bias[o];
                    let row = o * spec.n_in;
                    for i2 in 0..spec.n_in {
                        acc += (act[i2] as i32 - zp_in) * q_weights[row + i2] as i32;
                    }
                    scores[o] = acc;
                    let mut q = rq.apply(acc) + zp_out;
                    if spec.activation == super::Activation::Relu {
                        q = q.max(zp_out);
                    }
                    next[o] = q.clamp(QMIN, QMAX) as i8;
                }
                act = next;
                act_shape = vec![spec.n_out];
                act_params = *output;
                last_scores = Some(scores);
            }
            (LayerSpec::AvgPool2D { ph, pw }, QuantLayerInfo::Passthrough { output }) => {
                let (h, w, c) = (act_shape[0], act_shape[1], act_shape[2]);
                let (oh, ow) = (h / ph, w / pw);
                let zp = act_params.zero_point;
                let count = (ph * pw) as i64;
                let mut next = vec![0i8; oh * ow * c];
                for i2 in 0..oh {
                    for j in 0..ow {
                        for ch in 0..c {
                            let mut sum: i64 = 0;
                            for di in 0..ph {
                                for dj in 0..pw {
                                    let idx = ((i2 * ph + di) * w + (j * pw + dj)) * c + ch;
                                    sum += act[idx] as i64 - zp as i64;
                                }
                            }
                            let q = round_div(sum, count) + zp as i64;
                            next[(i2 * ow + j) * c + ch] = q.clamp(QMIN as i64, QMAX as i64) as i8;
                        }
                    }
                }
                act = next;
                act_shape = vec![oh, ow, c];
                act_params = *output;
            }
            (LayerSpec::MaxPool2D { ph, pw }, QuantLayerInfo::Passthrough { output }) => {
                let (h, w, c) = (act_shape[0], act_shape[1], act_shape[2]);
                let (oh, ow) = (h / ph, w / pw);
                let mut next = vec![0i8; oh * ow * c];
                for i2 in 0..oh {
                    for j in 0..ow {
                        for ch in 0..c {
                            let mut best = i8::MIN;
                            for di in 0..ph {
                                for dj in 0..pw {
                                    let idx = ((i2 * ph + di) * w + (j * pw + dj)) * c + ch;
                                    best = best.max(act[idx]);
                                }
                            }
                            next[(i2 * ow + j) * c + ch] = best;
                        }
                    }
                }
                act = next;
                act_shape = vec![oh, ow, c];
                act_params = *output;
            }
            (LayerSpec::Flatten, QuantLayerInfo::Passthrough { output }) => {
                act_shape = vec![act.len()];
                act_params = *output;
            }
            (LayerSpec::Softmax, QuantLayerInfo::Passthrough { .. }) => {
                // Bypassed: argmax over the preceding accumulators is
                // equivalent and avoids integer exponentials.
            }
            (layer, info) => {
                return Err(Error::InvalidConfig(format!(
                    "quantization table mismatch at layer {i}: {layer:?} vs {info:?}"
                )))
            }
        }
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(QuantTensor {
                shape: act_shape.clone(),
                values: act.clone(),
                params: act_params,
            });
        }
    }

    let scores = match last_scores {
        Some(s) => s,
        None => act.iter().map(|&q| q as i32).collect(),
    };
    let class = {
        let mut best = 0usize;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = i;
            }
        }
        best
    };
    Ok(IntInference { class, scores })
}

/// Accuracy of the integer path over labeled feature tensors.
pub fn evaluate_int8(model: &ModelArtifact, data: &[(Tensor, Label)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut correct = 0usize;
    for (x, label) in data {
        let q = quantize_input(model, x)?;
        if forward_int8(model, &q)?.class == label.index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
