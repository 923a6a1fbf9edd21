//! Performance characterization: per-stage latency breakdown of the
//! preprocessing + inference pipeline, and the shunt-resistor energy model.

mod energy;
mod report;

pub use energy::{energy_from_trace, EnergyReport, PowerTrace};
pub use report::{report, AccuracyReport, DatasetCounts, MemoryReport, Report};

use std::time::Instant;

use crate::dsp::{self, PreprocSettings};
use crate::error::{Error, Result};
use crate::nn::{self, ModelArtifact};
use crate::signals::TimeSeriesSample;

/// The seven pipeline stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Normalize,
    Spectrogram,
    AvgPool,
    LogScale,
    Transpose,
    Int8Quantize,
    CnnInference,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Normalize,
        Stage::Spectrogram,
        Stage::AvgPool,
        Stage::LogScale,
        Stage::Transpose,
        Stage::Int8Quantize,
        Stage::CnnInference,
    ];

    /// Stable identifier used in CSV output.
    pub fn key(self) -> &'static str {
        match self {
            Stage::Normalize => "normalize",
            Stage::Spectrogram => "spectrogram",
            Stage::AvgPool => "avg_pool",
            Stage::LogScale => "log_scale",
            Stage::Transpose => "transpose",
            Stage::Int8Quantize => "int8_quantize",
            Stage::CnnInference => "cnn_inference",
        }
    }

    /// Human-readable row label.
    pub fn label(self) -> &'static str {
        match self {
            Stage::Normalize => "input normalization to [-1, +1]",
            Stage::Spectrogram => "spectrogram calculation (3 axes)",
            Stage::AvgPool => "input compression (AVG pooling)",
            Stage::LogScale => "LOG-scaling spectrogram",
            Stage::Transpose => "transposition for CNN",
            Stage::Int8Quantize => "INT8 quantization to [-128, +127]",
            Stage::CnnInference => "CNN inference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Median,
    Mean,
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Statistic::Median => write!(f, "median"),
            Statistic::Mean => write!(f, "mean"),
        }
    }
}

/// Per-stage durations plus an end-to-end measurement over the same data.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTimings {
    /// `(stage, nanoseconds)` for all seven stages in pipeline order.
    pub stages: Vec<(Stage, u64)>,
    pub reps: usize,
    pub statistic: Statistic,
    pub end_to_end_ns: u64,
}

impl StageTimings {
    pub fn total_ns(&self) -> u64 {
        self.stages.iter().map(|(_, ns)| ns).sum()
    }

    pub fn get(&self, stage: Stage) -> Option<u64> {
        self.stages
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|(_, ns)| *ns)
    }
}

fn median_ns(mut values: Vec<u64>) -> u64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2
    }
}

/// Time each pipeline stage over `reps` repetitions of identical data and
/// report per-stage medians.
///
/// The model must be quantized: the measured pipeline is the deployed one,
/// ending in INT8 feature conversion and integer CNN inference. Stages run
/// sequentially in pipeline order within each repetition; an additional
/// uninstrumented end-to-end pass per repetition provides a consistency
/// reference. Host-absolute values are not comparable to microcontroller
/// figures; the breakdown structure and relative ordering are the point.
pub fn time_stages(
    sample: &TimeSeriesSample,
    model: &ModelArtifact,
    settings: &PreprocSettings,
    reps: usize,
) -> Result<StageTimings> {
    if reps < 3 {
        return Err(Error::InvalidConfig("reps must be >= 3".into()));
    }
    if !model.is_quantized() {
        return Err(Error::NotQuantized);
    }

    let win = dsp::tukey(dsp::NFFT, settings.tukey_alpha)?;
    let mut per_stage: Vec<Vec<u64>> = vec![Vec::with_capacity(reps); Stage::ALL.len()];
    let mut end_to_end = Vec::with_capacity(reps);

    for _ in 0..reps {
        let t = Instant::now();
        let normalized = dsp::instance_normalize(sample, settings.norm_scope)?;
        per_stage[0].push(t.elapsed().as_nanos() as u64);

        let t = Instant::now();
        let spec = dsp::spectrogram(&normalized, &win)?;
        per_stage[1].push(t.elapsed().as_nanos() as u64);

        let t = Instant::now();
        let pooled = dsp::avg_pool(&spec.data, dsp::POOL_T, dsp::POOL_F);
        per_stage[2].push(t.elapsed().as_nanos() as u64);

        let t = Instant::now();
        let logged = dsp::log_scale(&pooled, settings.log_eps);
        per_stage[3].push(t.elapsed().as_nanos() as u64);

        let t = Instant::now();
        let hwc = dsp::transpose_chw_to_hwc(&logged);
        per_stage[4].push(t.elapsed().as_nanos() as u64);

        let t = Instant::now();
        let q_input = nn::quantize_input(model, &hwc)?;
        per_stage[5].push(t.elapsed().as_nanos() as u64);

        let t = Instant::now();
        let inference = nn::forward_int8(model, &q_input)?;
        per_stage[6].push(t.elapsed().as_nanos() as u64);
        std::hint::black_box(inference);

        // End-to-end pass over the same data, timed as one unit.
        let t = Instant::now();
        let normalized = dsp::instance_normalize(sample, settings.norm_scope)?;
        let spec = dsp::spectrogram(&normalized, &win)?;
        let pooled = dsp::avg_pool(&spec.data, dsp::POOL_T, dsp::POOL_F);
        let logged = dsp::log_scale(&pooled, settings.log_eps);
        let hwc = dsp::transpose_chw_to_hwc(&logged);
        let q_input = nn::quantize_input(model, &hwc)?;
        let inference = nn::forward_int8(model, &q_input)?;
        end_to_end.push(t.elapsed().as_nanos() as u64);
        std::hint::black_box(inference);
    }

    let stages = Stage::ALL
        .iter()
        .zip(per_stage)
        .map(|(&stage, times)| (stage, median_ns(times)))
        .collect();
    Ok(StageTimings {
        stages,
        reps,
        statistic: Statistic::Median,
        end_to_end_ns: median_ns(end_to_end),
    })
}
