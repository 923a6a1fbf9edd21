//! Single-file binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        b"MMON"
//! version      u32 (currently 1)
//! meta_len     u32, followed by UTF-8 "key=value\n" lines (sorted by key)
//! input_shape  3 × u32
//! n_layers     u32, followed by one tagged record per layer
//! has_weights  u8; per trainable layer: u32 len + f32 weights,
//!                                        u32 len + f32 biases
//! has_quant    u8; input params, then one tagged record per layer
//! ```
//!
//! Quantization parameters are stored as f64 scale + i32 zero point. The
//! container contains no timestamps, so identical models serialize to
//! identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::quantized::{QuantLayerInfo, QuantizedModel};
use super::{Activation, Conv2DSpec, DenseSpec, LayerSpec, LayerWeights, ModelArtifact, Padding};
use crate::error::{Error, Result};
use crate::quant::QuantParams;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"MMON";
const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, v: &[u8]) {
        self.buf.extend_from_slice(v);
    }

    fn params(&mut self, p: QuantParams) {
        self.f64(p.scale);
        self.i32(p.zero_point);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::malformed(self.path, "unexpected end of file"));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn params(&mut self) -> Result<QuantParams> {
        let scale = self.f64()?;
        let zp = self.i32()?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::malformed(self.path, "non-positive scale"));
        }
        Ok(QuantParams::new(scale, zp))
    }
}

fn write_layer(w: &mut Writer, layer: &LayerSpec) {
    match *layer {
        LayerSpec::Conv2D(s) => {
            w.u8(0);
            w.u32(s.kh as u32);
            w.u32(s.kw as u32);
            w.u32(s.c_in as u32);
            w.u32(s.c_out as u32);
            w.u32(s.stride as u32);
            w.u8(match s.padding {
                Padding::Valid => 0,
                Padding::Same => 1,
            });
            w.u8(match s.activation {
                Activation::None => 0,
                Activation::Relu => 1,
            });
        }
        LayerSpec::AvgPool2D { ph, pw } => {
            w.u8(1);
            w.u32(ph as u32);
            w.u32(pw as u32);
        }
        LayerSpec::MaxPool2D { ph, pw } => {
            w.u8(2);
            w.u32(ph as u32);
            w.u32(pw as u32);
        }
        LayerSpec::Flatten => w.u8(3),
        LayerSpec::Dense(s) => {
            w.u8(4);
            w.u32(s.n_in as u32);
            w.u32(s.n_out as u32);
            w.u8(match s.activation {
                Activation::None => 0,
                Activation::Relu => 1,
            });
        }
        LayerSpec::Softmax => w.u8(5),
    }
}

fn read_activation(r: &mut Reader) -> Result<Activation> {
    match r.u8()? {
        0 => Ok(Activation::None),
        1 => Ok(Activation::Relu),
        other => Err(Error::malformed(r.path, format!("bad activation tag {other}"))),
    }
}

fn read_layer(r: &mut Reader) -> Result<LayerSpec> {
    match r.u8()? {
        0 => {
            let kh = r.u32()? as usize;
            let kw = r.u32()? as usize;
            let c_in = r.u32()? as usize;
            let c_out = r.u32()? as usize;
            let stride = r.u32()? as usize;
            let padding = match r.u8()? {
                0 => Padding::Valid,
                1 => Padding::Same,
                other => {
                    return Err(Error::malformed(r.path, format!("bad padding tag {other}")))
                }
            };
            let activation = read_activation(r)?;
            Ok(LayerSpec::Conv2D(Conv2DSpec {
                kh,
                kw,
                c_in,
                c_out,
                stride,
                padding,
                activation,
            }))
        }
        1 => Ok(LayerSpec::AvgPool2D {
            ph: r.u32()? as usize,
            pw: r.u32()? as usize,
        }),
        2 => Ok(LayerSpec::MaxPool2D {
            ph: r.u32()? as usize,
            pw: r.u32()? as usize,
        }),
        3 => Ok(LayerSpec::Flatten),
        4 => {
            let n_in = r.u32()? as usize;
            let n_out = r.u32()? as usize;
            let activation = read_activation(r)?;
            Ok(LayerSpec::Dense(DenseSpec {
                n_in,
                n_out,
                activation,
            }))
        }
        5 => Ok(LayerSpec::Softmax),
        other => Err(Error::malformed(r.path, format!("bad layer tag {other}"))),
    }
}

impl ModelArtifact {
    /// Serialize the model to the container byte format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);

        let mut meta = String::new();
        for (k, v) in &self.metadata {
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        w.u32(meta.len() as u32);
        w.bytes(meta.as_bytes());

        for dim in self.input_shape {
            w.u32(dim as u32);
        }

        w.u32(self.layers.len() as u32);
        for layer in &self.layers {
            write_layer(&mut w, layer);
        }

        let has_weights = self.weights.iter().any(Option::is_some);
        w.u8(has_weights as u8);
        if has_weights {
            for lw in self.weights.iter().flatten() {
                w.u32(lw.w.len() as u32);
                for &v in lw.w.data() {
                    w.f32(v as f32);
                }
                w.u32(lw.b.len() as u32);
                for &v in &lw.b {
                    w.f32(v as f32);
                }
            }
        }

        w.u8(self.quant.is_some() as u8);
        if let Some(q) = &self.quant {
            w.params(q.input);
            for info in &q.layers {
                match info {
                    QuantLayerInfo::Passthrough { output } => {
                        w.u8(0);
                        w.params(*output);
                    }
                    QuantLayerInfo::Weighted {
                        weights,
                        q_weights,
                        q_bias,
                        output,
                    } => {
                        w.u8(1);
                        w.params(*weights);
                        w.u32(q_weights.len() as u32);
                        w.bytes(&q_weights.iter().map(|&v| v as u8).collect::<Vec<u8>>());
                        w.u32(q_bias.len() as u32);
                        for &b in q_bias {
                            w.i32(b);
                        }
                        w.params(*output);
                    }
                }
            }
        }

        w.buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader {
            buf: bytes,
            pos: 0,
            path,
        };
        if r.take(4)? != MAGIC {
            return Err(Error::malformed(path, "bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::malformed(
                path,
                format!("unsupported version {version}"),
            ));
        }

        let meta_len = r.u32()? as usize;
        let meta_bytes = r.take(meta_len)?;
        let meta_text = std::str::from_utf8(meta_bytes)
            .map_err(|_| Error::malformed(path, "metadata is not UTF-8"))?;
        let mut metadata = BTreeMap::new();
        for line in meta_text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                metadata.insert(k.to_string(), v.to_string());
            }
        }

        let input_shape = [
            r.u32()? as usize,
            r.u32()? as usize,
            r.u32()? as usize,
        ];

        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            layers.push(read_layer(&mut r)?);
        }

        let has_weights = r.u8()? != 0;
        let mut weights: Vec<Option<LayerWeights>> = Vec::with_capacity(n_layers);
        if has_weights {
            for layer in &layers {
                if !layer.is_trainable() {
                    weights.push(None);
                    continue;
                }
                let w_len = r.u32()? as usize;
                if w_len != layer.weight_count() {
                    return Err(Error::malformed(
                        path,
                        format!(
                            "weight tensor length {w_len} does not match layer {layer:?}"
                        ),
                    ));
                }
                let mut w_data = Vec::with_capacity(w_len);
                for _ in 0..w_len {
                    w_data.push(r.f32()? as f64);
                }
                let b_len = r.u32()? as usize;
                if b_len != layer.bias_count() {
                    return Err(Error::malformed(path, "bias length mismatch"));
                }
                let mut b = Vec::with_capacity(b_len);
                for _ in 0..b_len {
                    b.push(r.f32()? as f64);
                }
                let shape = match *layer {
                    LayerSpec::Conv2D(s) => vec![s.c_out, s.kh, s.kw, s.c_in],
                    LayerSpec::Dense(s) => vec![s.n_out, s.n_in],
                    _ => unreachable!(),
                };
                weights.push(Some(LayerWeights {
                    w: Tensor::from_vec(&shape, w_data),
                    b,
                }));
            }
        } else {
            weights = layers.iter().map(|_| None).collect();
        }

        let has_quant = r.u8()? != 0;
        let quant = if has_quant {
            let input = r.params()?;
            let mut infos = Vec::with_capacity(n_layers);
            for layer in &layers {
                match r.u8()? {
                    0 => infos.push(QuantLayerInfo::Passthrough { output: r.params()? }),
                    1 => {
                        let w_params = r.params()?;
                        let qw_len = r.u32()? as usize;
                        if qw_len != layer.weight_count() {
                            return Err(Error::malformed(path, "quant weight length mismatch"));
                        }
                        let q_weights = r.take(qw_len)?.iter().map(|&b| b as i8).collect();
                        let qb_len = r.u32()? as usize;
                        if qb_len != layer.bias_count() {
                            return Err(Error::malformed(path, "quant bias length mismatch"));
                        }
                        let mut q_bias = Vec::with_capacity(qb_len);
                        for _ in 0..qb_len {
                            q_bias.push(r.i32()?);
                        }
                        let output = r.params()?;
                        infos.push(QuantLayerInfo::Weighted {
                            weights: w_params,
                            q_weights,
                            q_bias,
                            output,
                        });
                    }
                    other => {
                        return Err(Error::malformed(
                            path,
                            format!("bad quant layer tag {other}"),
                        ))
                    }
                }
            }
            Some(QuantizedModel {
                input,
                layers: infos,
            })
        } else {
            None
        };

        if r.pos != bytes.len() {
            return Err(Error::malformed(path, "trailing bytes"));
        }

        Ok(ModelArtifact {
            input_shape,
            layers,
            weights,
            quant,
            metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        ModelArtifact::from_bytes(&bytes, path)
    }
}
