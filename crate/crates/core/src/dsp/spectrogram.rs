//! STFT magnitude spectrograms of 1-second samples.

use num_complex::Complex64;

use super::fft::fft_in_place;
use super::window::WindowFn;
use crate::error::{Error, Result};
use crate::signals::{TimeSeriesSample, SAMPLE_LEN};
use crate::tensor::Tensor;

/// FFT order of each STFT frame.
pub const NFFT: usize = 256;
/// Overlap between successive frames in samples.
pub const STFT_OVERLAP: usize = 8;
/// Hop between frame starts.
pub const HOP: usize = NFFT - STFT_OVERLAP;
/// Frames per 1-second sample: floor((8000 - 256) / 248) + 1.
pub const FRAMES: usize = (SAMPLE_LEN - NFFT) / HOP + 1;
/// Retained one-sided frequency bins (DC through Nyquist).
pub const BINS: usize = NFFT / 2 + 1;

/// Magnitude spectrogram of all three axes: shape `[3, 32, 129]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub data: Tensor,
}

impl Spectrogram {
    pub fn axes(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn bins(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Compute the magnitude spectrogram of a single axis.
///
/// Frame `n` covers samples `[n·248, n·248 + 256)`; each frame is windowed,
/// transformed with a 256-point FFT, and reduced to the 129 one-sided bin
/// magnitudes. The input must be exactly one second (8000 samples).
pub fn spectrogram_axis(x: &[f64], win: &WindowFn) -> Result<Tensor> {
    if x.len() != SAMPLE_LEN {
        return Err(Error::shape(
            format!("{SAMPLE_LEN} samples"),
            x.len().to_string(),
        ));
    }
    if win.len() != NFFT {
        return Err(Error::shape(
            format!("window of {NFFT} coefficients"),
            win.len().to_string(),
        ));
    }
    let coeffs = win.coefficients();
    let mut out = Tensor::zeros(&[FRAMES, BINS]);
    let mut frame = vec![Complex64::new(0.0, 0.0); NFFT];
    for n in 0..FRAMES {
        let start = n * HOP;
        for (m, slot) in frame.iter_mut().enumerate() {
            *slot = Complex64::new(x[start + m] * coeffs[m], 0.0);
        }
        fft_in_place(&mut frame);
        let row = &mut out.data_mut()[n * BINS..(n + 1) * BINS];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = frame[k].norm();
        }
    }
    Ok(out)
}

/// Spectrograms of all three axes of a sample, stacked as `[3, 32, 129]`.
pub fn spectrogram(sample: &TimeSeriesSample, win: &WindowFn) -> Result<Spectrogram> {
    let mut data = Tensor::zeros(&[3, FRAMES, BINS]);
    for axis in 0..3 {
        let plane = spectrogram_axis(sample.series().axis(axis), win)?;
        let dst = &mut data.data_mut()[axis * FRAMES * BINS..(axis + 1) * FRAMES * BINS];
        dst.copy_from_slice(plane.data());
    }
    Ok(Spectrogram { data })
}
