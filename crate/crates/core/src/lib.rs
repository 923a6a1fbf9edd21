//! Vibration-based milling process quality monitoring, end to end.
//!
//! The crate covers the full flow from raw 3-axis vibration data to a
//! deployable INT8 classifier and its performance characterization:
//!
//! - [`signals`] — synthetic labeled vibration data, RMS-threshold
//!   segmentation of continuous recordings, 1-second windowing, and
//!   reproducible train/test splits.
//! - [`dsp`] — the preprocessing chain: per-sample instance normalization,
//!   Tukey-windowed STFT spectrograms (3×32×129), (8×2) average pooling to
//!   3×4×65, and log10 scaling.
//! - [`quant`] — affine signed INT8 quantization with calibration, plus the
//!   fixed-point requantization multiplier used by integer inference.
//! - [`nn`] — a tiny trainable CNN (float forward/backward, Adam, early
//!   stopping), post-training INT8 conversion, integer-only inference, and a
//!   parameter-budget accounting of 12,892 bytes.
//! - [`bench`] — per-stage latency breakdown of the pipeline and a
//!   shunt-resistor energy model (average power, energy per inference).
//!
//! All operations are deterministic for fixed seeds; training produces
//! byte-identical model containers across runs with identical inputs.

pub mod bench;
pub mod dsp;
pub mod error;
pub mod nn;
pub mod quant;
pub mod signals;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
