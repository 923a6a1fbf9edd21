//! Definition-level spectral oracles.
//!
//! These are deliberately slow O(N²) implementations written straight from
//! the transform definitions. They share no code with the fast FFT path and
//! exist to pin its correctness in tests and acceptance checks.

use num_complex::Complex64;

/// Direct DFT summation: `X[k] = Σ_m x[m] · exp(sign · j·2π·k·m / N)`.
///
/// `sign = -1.0` is the usual analysis convention; `sign = +1.0` evaluates
/// the positive-exponent form. For real inputs both yield identical
/// magnitudes.
pub fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, &v) in x.iter().enumerate() {
            let angle = sign * 2.0 * std::f64::consts::PI * (k * m) as f64 / n as f64;
            acc += v * Complex64::new(angle.cos(), angle.sin());
        }
        out.push(acc);
    }
    out
}

/// Magnitudes of one windowed STFT frame by direct summation
/// (positive-exponent convention, all `N` bins).
pub fn naive_frame_magnitudes(frame: &[f64], window: &[f64]) -> Vec<f64> {
    assert_eq!(frame.len(), window.len());
    let x: Vec<Complex64> = frame
        .iter()
        .zip(window)
        .map(|(&v, &w)| Complex64::new(v * w, 0.0))
        .collect();
    naive_dft(&x, 1.0).iter().map(|c| c.norm()).collect()
}

/// Full-length DFT magnitudes of a real signal of arbitrary length.
///
/// Uses a per-bin complex rotor instead of per-term trig so that whole
/// 1-second signals (8000 samples) stay affordable as an oracle; the rotor
/// drift over 8000 steps is far below the tolerances it guards.
pub fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let angle = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let step = Complex64::new(angle.cos(), angle.sin());
        let mut rotor = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for &v in x {
            acc += rotor * v;
            rotor *= step;
        }
        out.push(acc.norm());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tone_lands_on_its_bin() {
        let n = 200usize;
        let k0 = 7usize;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * k0 as f64 * i as f64 / n as f64).cos())
            .collect();
        let mags = dft_magnitudes(&x);
        assert!((mags[k0] - n as f64 / 2.0).abs() < 1e-6);
        for (k, &m) in mags.iter().enumerate() {
            if k != k0 && k != n - k0 {
                assert!(m < 1e-6, "bin {k} = {m}");
            }
        }
    }

    #[test]
    fn exponent_sign_does_not_change_real_signal_magnitudes() {
        let x: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), 0.0))
            .collect();
        let pos = naive_dft(&x, 1.0);
        let neg = naive_dft(&x, -1.0);
        for (a, b) in pos.iter().zip(&neg) {
            assert!((a.norm() - b.norm()).abs() < 1e-10);
        }
    }
}
