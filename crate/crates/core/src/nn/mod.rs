//! Tiny CNN: float training, INT8 post-training quantization, integer
//! inference, and parameter-budget accounting.

mod container;
mod layers;
mod quantized;
mod train;

pub mod reference;

pub use layers::{
    avg_pool2d_backward, avg_pool2d_forward, conv2d_backward, conv2d_forward, dense_backward,
    dense_forward, flatten_forward, max_pool2d_backward, max_pool2d_forward, softmax,
};
pub use quantized::{
    evaluate_int8, forward_int8, forward_int8_trace, quantize_input, quantize_model, IntInference,
    QuantLayerInfo, QuantizedModel,
};
pub use train::{evaluate, lr_at_step, prepare_features, train, EpochStats, StopReason,
                TrainConfig, TrainHistory};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::quant::{QMAX, QMIN};
use crate::tensor::Tensor;

/// INT8 parameter storage budget: 12.59 kiB.
pub const PARAM_BUDGET_BYTES: usize = 12_892;

/// CNN input shape: pooled time steps × pooled frequency bins × axes.
pub const INPUT_SHAPE: [usize; 3] = [4, 65, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2DSpec {
    pub kh: usize,
    pub kw: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub activation: Activation,
}

/// One layer of the network, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2D(Conv2DSpec),
    AvgPool2D { ph: usize, pw: usize },
    MaxPool2D { ph: usize, pw: usize },
    Flatten,
    Dense(DenseSpec),
    Softmax,
}

/// Shape of the data flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataShape {
    Hwc(usize, usize, usize),
    Flat(usize),
}

impl DataShape {
    pub fn elements(&self) -> usize {
        match *self {
            DataShape::Hwc(h, w, c) => h * w * c,
            DataShape::Flat(n) => n,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match *self {
            DataShape::Hwc(h, w, c) => vec![h, w, c],
            DataShape::Flat(n) => vec![n],
        }
    }
}

impl std::fmt::Display for DataShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            DataShape::Hwc(h, w, c) => write!(f, "{h}x{w}x{c}"),
            DataShape::Flat(n) => write!(f, "{n}"),
        }
    }
}

impl LayerSpec {
    /// Shape produced for a given input shape, or an error when incompatible.
    pub fn output_shape(&self, input: DataShape) -> Result<DataShape> {
        match (*self, input) {
            (LayerSpec::Conv2D(spec), DataShape::Hwc(h, w, c)) => {
                if c != spec.c_in {
                    return Err(Error::shape(
                        format!("{} input channels", spec.c_in),
                        c.to_string(),
                    ));
                }
                if spec.stride == 0 {
                    return Err(Error::InvalidConfig("conv stride must be >= 1".into()));
                }
                let (oh, ow) = match spec.padding {
                    Padding::Same => (h.div_ceil(spec.stride), w.div_ceil(spec.stride)),
                    Padding::Valid => {
                        if h < spec.kh || w < spec.kw {
                            return Err(Error::shape(
                                format!("input at least {}x{}", spec.kh, spec.kw),
                                format!("{h}x{w}"),
                            ));
                        }
                        ((h - spec.kh) / spec.stride + 1, (w - spec.kw) / spec.stride + 1)
                    }
                };
                Ok(DataShape::Hwc(oh, ow, spec.c_out))
            }
            (LayerSpec::AvgPool2D { ph, pw }, DataShape::Hwc(h, w, c))
            | (LayerSpec::MaxPool2D { ph, pw }, DataShape::Hwc(h, w, c)) => {
                if ph == 0 || pw == 0 || h < ph || w < pw {
                    return Err(Error::shape(
                        format!("input at least {ph}x{pw} for pooling"),
                        format!("{h}x{w}"),
                    ));
                }
                Ok(DataShape::Hwc(h / ph, w / pw, c))
            }
            (LayerSpec::Flatten, DataShape::Hwc(h, w, c)) => Ok(DataShape::Flat(h * w * c)),
            (LayerSpec::Dense(spec), DataShape::Flat(n)) => {
                if n != spec.n_in {
                    return Err(Error::shape(
                        format!("{} dense inputs", spec.n_in),
                        n.to_string(),
                    ));
                }
                Ok(DataShape::Flat(spec.n_out))
            }
            (LayerSpec::Softmax, DataShape::Flat(n)) => Ok(DataShape::Flat(n)),
            (layer, shape) => Err(Error::shape(
                format!("input compatible with {layer:?}"),
                shape.to_string(),
            )),
        }
    }

    /// Number of trainable weight scalars.
    pub fn weight_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2D(s) => s.kh * s.kw * s.c_in * s.c_out,
            LayerSpec::Dense(s) => s.n_in * s.n_out,
            _ => 0,
        }
    }

    /// Number of bias scalars.
    pub fn bias_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2D(s) => s.c_out,
            LayerSpec::Dense(s) => s.n_out,
            _ => 0,
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.weight_count() > 0
    }

    pub fn activation(&self) -> Activation {
        match *self {
            LayerSpec::Conv2D(s) => s.activation,
            LayerSpec::Dense(s) => s.activation,
            _ => Activation::None,
        }
    }
}

/// INT8 parameter storage in bytes: one byte per weight, four per bias
/// (biases are kept as 32-bit integers for exact accumulation).
pub fn param_budget(layers: &[LayerSpec]) -> usize {
    layers
        .iter()
        .map(|l| l.weight_count() + 4 * l.bias_count())
        .sum()
}

/// Shapes each layer produces for a given input, checking compatibility.
pub fn shape_chain(layers: &[LayerSpec], input: [usize; 3]) -> Result<Vec<DataShape>> {
    let mut shapes = Vec::with_capacity(layers.len());
    let mut current = DataShape::Hwc(input[0], input[1], input[2]);
    for layer in layers {
        current = layer.output_shape(current)?;
        shapes.push(current);
    }
    Ok(shapes)
}

/// Worst-case INT8 accumulator magnitude over all weighted layers:
/// `taps * 127 * 255` plus the bias headroom enforced at quantization time.
pub fn max_accumulator_magnitude(layers: &[LayerSpec]) -> i64 {
    let max_taps = layers
        .iter()
        .map(|l| match *l {
            LayerSpec::Conv2D(s) => s.kh * s.kw * s.c_in,
            LayerSpec::Dense(s) => s.n_in,
            _ => 0,
        })
        .max()
        .unwrap_or(0) as i64;
    max_taps * (QMAX as i64) * ((QMAX - QMIN) as i64) + quantized::BIAS_MAGNITUDE_LIMIT
}

/// Peak int8 activation arena: the largest input+output pair any layer
/// holds live at once (ping-pong buffer model).
pub fn activation_arena_bytes(layers: &[LayerSpec], input: [usize; 3]) -> Result<usize> {
    let shapes = shape_chain(layers, input)?;
    let mut prev = input.iter().product::<usize>();
    let mut peak = 0usize;
    for shape in shapes {
        let out = shape.elements();
        peak = peak.max(prev + out);
        prev = out;
    }
    Ok(peak)
}

/// The stock architecture: two 3×3 convolutions, one average pool, and a
/// small dense head, sized to fit the 12,892-byte parameter budget
/// (7,760 bytes as configured).
pub fn default_architecture() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv2D(Conv2DSpec {
            kh: 3,
            kw: 3,
            c_in: 3,
            c_out: 8,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Relu,
        }),
        LayerSpec::Conv2D(Conv2DSpec {
            kh: 3,
            kw: 3,
            c_in: 8,
            c_out: 16,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Relu,
        }),
        LayerSpec::AvgPool2D { ph: 2, pw: 8 },
        LayerSpec::Flatten,
        LayerSpec::Dense(DenseSpec {
            n_in: 256,
            n_out: 24,
            activation: Activation::Relu,
        }),
        LayerSpec::Dense(DenseSpec {
            n_in: 24,
            n_out: 2,
            activation: Activation::None,
        }),
        LayerSpec::Softmax,
    ]
}

/// Float weights of one trainable layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    /// Conv: `[c_out, kh, kw, c_in]`; Dense: `[n_out, n_in]`.
    pub w: Tensor,
    pub b: Vec<f64>,
}

/// A complete model: architecture, float weights, optional quantization
/// tables, and free-form metadata recorded into the container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    /// Parallel to `layers`; `Some` exactly for trainable layers.
    pub weights: Vec<Option<LayerWeights>>,
    pub quant: Option<QuantizedModel>,
    pub metadata: BTreeMap<String, String>,
}

impl ModelArtifact {
    /// Build a model with seeded Glorot-uniform weights and zero biases.
    pub fn initialized(layers: Vec<LayerSpec>, input_shape: [usize; 3], seed: u64) -> Result<Self> {
        use rand::{Rng, SeedableRng};
        shape_chain(&layers, input_shape)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layers.len());
        for layer in &layers {
            if !layer.is_trainable() {
                weights.push(None);
                continue;
            }
            let (fan_in, fan_out, shape) = match *layer {
                LayerSpec::Conv2D(s) => (
                    s.kh * s.kw * s.c_in,
                    s.kh * s.kw * s.c_out,
                    vec![s.c_out, s.kh, s.kw, s.c_in],
                ),
                LayerSpec::Dense(s) => (s.n_in, s.n_out, vec![s.n_out, s.n_in]),
                _ => unreachable!(),
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..shape.iter().product::<usize>())
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(Some(LayerWeights {
                w: Tensor::from_vec(&shape, data),
                b: vec![0.0; layer.bias_count()],
            }));
        }
        Ok(ModelArtifact {
            input_shape,
            layers,
            weights,
            quant: None,
            metadata: BTreeMap::new(),
        })
    }

    /// INT8 parameter bytes of this architecture.
    pub fn param_budget(&self) -> usize {
        param_budget(&self.layers)
    }

    pub fn is_quantized(&self) -> bool {
        self.quant.is_some()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::shape(
                format!(
                    "{}x{}x{}",
                    self.input_shape[0], self.input_shape[1], self.input_shape[2]
                ),
                x.shape_string(),
            ));
        }
        Ok(())
    }

    /// Outputs of every layer in order (float path).
    pub fn forward_all(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(x)?;
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x } else { &outputs[i - 1] };
            let weights = self.weights[i].as_ref();
            let out = match *layer {
                LayerSpec::Conv2D(spec) => {
                    let lw = weights.ok_or(Error::EmptyInput("conv weights"))?;
                    layers::conv2d_forward(input, &lw.w, &lw.b, &spec)
                }
                LayerSpec::AvgPool2D { ph, pw } => layers::avg_pool2d_forward(input, ph, pw),
                LayerSpec::MaxPool2D { ph, pw } => layers::max_pool2d_forward(input, ph, pw),
                LayerSpec::Flatten => layers::flatten_forward(input),
                LayerSpec::Dense(spec) => {
                    let lw = weights.ok_or(Error::EmptyInput("dense weights"))?;
                    layers::dense_forward(input, &lw.w, &lw.b, &spec)
                }
                LayerSpec::Softmax => {
                    Tensor::from_vec(&[input.len()], layers::softmax(input.data()))
                }
            };
            outputs.push(out);
        }
        Ok(outputs)
    }

    /// Float forward pass to class probabilities.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        let outputs = self.forward_all(x)?;
        Ok(outputs
            .last()
            .ok_or(Error::EmptyInput("model has no layers"))?
            .data()
            .to_vec())
    }

    /// Predicted class index (first maximum on ties).
    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let probs = self.forward(x)?;
        Ok(argmax(&probs))
    }

    pub fn set_metadata(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(
            !value.contains('\n') && !key.contains('\n'),
            "metadata must be single-line"
        );
        self.metadata.insert(key.to_string(), value);
    }

    /// Preprocessing settings recorded at training time; fields missing from
    /// the metadata fall back to defaults.
    pub fn preproc_settings(&self) -> crate::dsp::PreprocSettings {
        let mut settings = crate::dsp::PreprocSettings::default();
        if let Some(alpha) = self.metadata.get("alpha").and_then(|v| v.parse().ok()) {
            settings.tukey_alpha = alpha;
        }
        if let Some(eps) = self.metadata.get("eps").and_then(|v| v.parse().ok()) {
            settings.log_eps = eps;
        }
        if let Some(scope) = self.metadata.get("norm_scope") {
            settings.norm_scope = match scope.as_str() {
                "per_axis" => crate::dsp::NormScope::PerAxis,
                _ => crate::dsp::NormScope::Joint,
            };
        }
        settings
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
