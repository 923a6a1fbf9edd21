//! Preprocessing chain: instance normalization → Tukey-windowed STFT →
//! average pooling → log10 scaling → CNN input layout.

mod fft;
mod pool;
mod spectrogram;
mod window;

pub mod export;
pub mod reference;

pub use fft::{fft_in_place, fft_real};
pub use pool::avg_pool;
pub use spectrogram::{spectrogram, spectrogram_axis, Spectrogram, BINS, FRAMES, HOP, NFFT,
                      STFT_OVERLAP};
pub use window::{tukey, WindowFn};

use crate::error::{Error, Result};
use crate::quant::QuantTensor;
use crate::signals::{TimeSeries, TimeSeriesSample};
use crate::tensor::Tensor;

/// Time-axis pool width (32 frames → 4).
pub const POOL_T: usize = 8;
/// Frequency-axis pool width (129 bins → 65, last window partial).
pub const POOL_F: usize = 2;
/// Pooled time steps.
pub const POOLED_T: usize = FRAMES / POOL_T;
/// Pooled frequency bins.
pub const POOLED_F: usize = BINS.div_ceil(POOL_F);

/// Which values feed the per-sample min/max of instance normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormScope {
    /// One min/max across all three axes (default).
    Joint,
    /// Independent min/max per axis.
    PerAxis,
}

/// Preprocessing knobs; defaults reproduce the standard chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocSettings {
    pub tukey_alpha: f64,
    pub log_eps: f64,
    pub norm_scope: NormScope,
}

impl Default for PreprocSettings {
    fn default() -> Self {
        PreprocSettings {
            tukey_alpha: 0.5,
            log_eps: 1e-12,
            norm_scope: NormScope::Joint,
        }
    }
}

/// The pooled, log-scaled feature tensor of one sample: shape `[3, 4, 65]`,
/// with an optional INT8 view attached by quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub data: Tensor,
    pub quantized: Option<QuantTensor>,
}

impl FeatureMap {
    /// Attach the INT8 view under the given parameters (typically a model's
    /// input parameters).
    pub fn quantize(&mut self, params: crate::quant::QuantParams) -> crate::error::Result<()> {
        self.quantized = Some(crate::quant::quantize(&self.data, params)?);
        Ok(())
    }
}

/// Rescale a sample to `[-1, 1]`: `x' = 2·(x - min)/(max - min) - 1`.
///
/// By default min and max are taken jointly over all three axes, preserving
/// inter-axis magnitude relations; [`NormScope::PerAxis`] normalizes each
/// axis independently. A constant sample has no defined normalization and is
/// rejected.
pub fn instance_normalize(
    sample: &TimeSeriesSample,
    scope: NormScope,
) -> Result<TimeSeriesSample> {
    let series = sample.series();
    let normalize_axis = |axis: &[f64], min: f64, max: f64| -> Vec<f64> {
        let span = max - min;
        axis.iter().map(|&v| 2.0 * (v - min) / span - 1.0).collect()
    };
    let axes = match scope {
        NormScope::Joint => {
            let (min, max) = series.min_max().ok_or(Error::EmptyInput("sample"))?;
            if max <= min {
                return Err(Error::DegenerateSample);
            }
            [
                normalize_axis(series.axis(0), min, max),
                normalize_axis(series.axis(1), min, max),
                normalize_axis(series.axis(2), min, max),
            ]
        }
        NormScope::PerAxis => {
            let mut axes: [Vec<f64>; 3] = Default::default();
            for (i, out) in axes.iter_mut().enumerate() {
                let axis = series.axis(i);
                let min = axis.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = axis.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !(max > min) {
                    return Err(Error::DegenerateSample);
                }
                *out = normalize_axis(axis, min, max);
            }
            axes
        }
    };
    sample.with_series(TimeSeries::new(axes, series.sample_rate())?)
}

/// Elementwise `log10(max(value, eps))`; `eps` floors zero bins.
pub fn log_scale(pooled: &Tensor, eps: f64) -> Tensor {
    pooled.map(|v| v.max(eps).log10())
}

/// Full float preprocessing of one sample to a `[3, 4, 65]` feature map.
pub fn preprocess(sample: &TimeSeriesSample, settings: &PreprocSettings) -> Result<FeatureMap> {
    let win = tukey(NFFT, settings.tukey_alpha)?;
    preprocess_with_window(sample, &win, settings)
}

/// [`preprocess`] with a caller-provided window (avoids rebuilding the
/// window per sample when preprocessing whole datasets).
pub fn preprocess_with_window(
    sample: &TimeSeriesSample,
    win: &WindowFn,
    settings: &PreprocSettings,
) -> Result<FeatureMap> {
    let normalized = instance_normalize(sample, settings.norm_scope)?;
    let spec = spectrogram(&normalized, win)?;
    let pooled = avg_pool(&spec.data, POOL_T, POOL_F);
    let data = log_scale(&pooled, settings.log_eps);
    Ok(FeatureMap {
        data,
        quantized: None,
    })
}

/// Transpose a `[3, 4, 65]` feature map into the CNN's `[4, 65, 3]`
/// height × width × channels layout.
pub fn to_cnn_input(features: &FeatureMap) -> Tensor {
    transpose_chw_to_hwc(&features.data)
}

/// Transpose `[c, h, w]` to `[h, w, c]`.
pub fn transpose_chw_to_hwc(t: &Tensor) -> Tensor {
    let shape = t.shape();
    assert_eq!(shape.len(), 3);
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let mut out = Tensor::zeros(&[h, w, c]);
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                out.set3(hi, wi, ci, t.at3(ci, hi, wi));
            }
        }
    }
    out
}
