//! Tukey (tapered cosine) analysis window.

use crate::error::{Error, Result};

/// A precomputed window function.
///
/// Coefficients are symmetric (`w[n] == w[len-1-n]`, enforced by mirroring
/// the first half) and lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFn {
    alpha: f64,
    coefficients: Vec<f64>,
}

impl WindowFn {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

/// Build a Tukey window: a flat center of width `(1 - alpha)·L` with cosine
/// ramps of width `alpha·L/2` on each side. `alpha = 0` degenerates to the
/// rectangular window and `alpha = 1` to the Hann window.
pub fn tukey(length: usize, alpha: f64) -> Result<WindowFn> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "tukey alpha {alpha} outside [0, 1]"
        )));
    }
    if length == 0 {
        return Err(Error::InvalidConfig("window length must be >= 1".into()));
    }
    let mut w = vec![1.0f64; length];
    if length > 1 && alpha > 0.0 {
        let span = (length - 1) as f64;
        for (n, value) in w.iter_mut().enumerate().take(length / 2 + 1) {
            // Position of the taper break on the normalized axis.
            let x = 2.0 * n as f64 / (alpha * span);
            if x < 1.0 {
                *value = 0.5 * (1.0 + (std::f64::consts::PI * (x - 1.0)).cos());
            }
        }
        // Mirror the first half so symmetry is bit-exact.
        for n in 0..length / 2 {
            w[length - 1 - n] = w[n];
        }
    }
    Ok(WindowFn {
        alpha,
        coefficients: w,
    })
}
