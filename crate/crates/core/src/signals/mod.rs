//! Labeled 3-axis vibration data: synthesis, segmentation, windowing, splits.

mod segment;
mod split;
mod synth;

pub mod io;

pub use segment::{segment_movements, window_segment};
pub use split::split_dataset;
pub use synth::{synth_dataset, synth_sample};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default sensor sampling rate in Hz.
pub const SAMPLE_RATE: u32 = 8000;

/// Samples per 1-second window at the default rate.
pub const SAMPLE_LEN: usize = SAMPLE_RATE as usize;

/// Surface quality class of a milling pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Good,
    Bad,
}

impl Label {
    /// Class index used by the classifier head (Good = 0, Bad = 1).
    pub fn index(self) -> usize {
        match self {
            Label::Good => 0,
            Label::Bad => 1,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Good => write!(f, "good"),
            Label::Bad => write!(f, "bad"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "good" => Ok(Label::Good),
            "bad" => Ok(Label::Bad),
            other => Err(Error::InvalidConfig(format!("unknown label {other:?}"))),
        }
    }
}

/// A 3-axis acceleration recording of arbitrary length.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    axes: [Vec<f64>; 3],
    sample_rate: u32,
}

impl TimeSeries {
    pub fn new(axes: [Vec<f64>; 3], sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if axes[0].len() != axes[1].len() || axes[1].len() != axes[2].len() {
            return Err(Error::shape(
                "three axes of equal length",
                format!("{}/{}/{}", axes[0].len(), axes[1].len(), axes[2].len()),
            ));
        }
        Ok(TimeSeries { axes, sample_rate })
    }

    /// Number of time steps per axis.
    pub fn len(&self) -> usize {
        self.axes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn axes(&self) -> &[Vec<f64>; 3] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn into_axes(self) -> [Vec<f64>; 3] {
        self.axes
    }

    /// Copy out the sample range `[start, end)` of all three axes.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeries {
        TimeSeries {
            axes: [
                self.axes[0][start..end].to_vec(),
                self.axes[1][start..end].to_vec(),
                self.axes[2][start..end].to_vec(),
            ],
            sample_rate: self.sample_rate,
        }
    }

    /// Joint min/max over all three axes.
    pub fn min_max(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for axis in &self.axes {
            for &v in axis {
                min = min.min(v);
                max = max.max(v);
            }
        }
        Some((min, max))
    }
}

/// Provenance of a windowed sample: where it came from and which window it is.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Origin {
    pub source: String,
    pub segment: u32,
    pub window: u32,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.source, self.segment, self.window)
    }
}

/// One labeled 1-second window (exactly `sample_rate` samples per axis).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    series: TimeSeries,
    label: Label,
    origin: Origin,
}

impl TimeSeriesSample {
    pub fn new(series: TimeSeries, label: Label, origin: Origin) -> Result<Self> {
        let expected = series.sample_rate() as usize;
        if series.len() != expected {
            return Err(Error::shape(
                format!("{expected} samples per axis (1 s)"),
                series.len().to_string(),
            ));
        }
        Ok(TimeSeriesSample {
            series,
            label,
            origin,
        })
    }

    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// Replace the series, keeping label and origin. The new series must
    /// still be a valid 1-second window.
    pub fn with_series(&self, series: TimeSeries) -> Result<Self> {
        TimeSeriesSample::new(series, self.label, self.origin.clone())
    }
}

/// Band of broadband chatter energy injected into Bad samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChatterBand {
    pub low_hz: f64,
    pub high_hz: f64,
    pub amplitude: f64,
}

/// Configuration for synthetic milling-vibration samples.
///
/// Good samples are harmonics of the tooth-pass frequency
/// (`base_freq * n_inserts`) over a Gaussian noise floor; Bad samples add
/// band-limited chatter energy on top.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Spindle fundamental in Hz (50 Hz at 3000 rpm).
    pub base_freq: f64,
    /// Cutting inserts per revolution; multiplies the fundamental.
    pub n_inserts: u32,
    /// Amplitudes of successive tooth-pass harmonics.
    pub harmonic_amps: Vec<f64>,
    pub chatter: ChatterBand,
    pub noise_floor: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            base_freq: 50.0,
            n_inserts: 2,
            harmonic_amps: vec![1.0, 0.6, 0.3],
            chatter: ChatterBand {
                low_hz: 1200.0,
                high_hz: 2000.0,
                amplitude: 0.7,
            },
            noise_floor: 0.05,
            seed: 42,
            sample_rate: SAMPLE_RATE,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.base_freq > 0.0 && self.base_freq < nyquist) {
            return Err(Error::InvalidConfig(format!(
                "base_freq {} Hz outside (0, {nyquist}) Hz",
                self.base_freq
            )));
        }
        if self.n_inserts == 0 {
            return Err(Error::InvalidConfig("n_inserts must be >= 1".into()));
        }
        let tooth = self.base_freq * self.n_inserts as f64;
        let top = tooth * self.harmonic_amps.len().max(1) as f64;
        if top >= nyquist {
            return Err(Error::InvalidConfig(format!(
                "highest harmonic {top} Hz is at or above Nyquist {nyquist} Hz"
            )));
        }
        if self.harmonic_amps.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidConfig(
                "harmonic amplitudes must be non-negative".into(),
            ));
        }
        if self.chatter.amplitude < 0.0 {
            return Err(Error::InvalidConfig(
                "chatter amplitude must be non-negative".into(),
            ));
        }
        if !(self.chatter.low_hz > 0.0
            && self.chatter.low_hz < self.chatter.high_hz
            && self.chatter.high_hz < nyquist)
        {
            return Err(Error::InvalidConfig(format!(
                "chatter band ({}, {}) Hz must satisfy 0 < low < high < {nyquist}",
                self.chatter.low_hz, self.chatter.high_hz
            )));
        }
        if self.noise_floor < 0.0 {
            return Err(Error::InvalidConfig(
                "noise floor must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Disjoint train/test partition of labeled samples.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<TimeSeriesSample>,
    pub test: Vec<TimeSeriesSample>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn counts_by_label(&self) -> ((usize, usize), (usize, usize)) {
        let count = |set: &[TimeSeriesSample]| {
            let good = set.iter().filter(|s| s.label() == Label::Good).count();
            (good, set.len() - good)
        };
        (count(&self.train), count(&self.test))
    }
}
