//! Iterative radix-2 decimation-in-time FFT.
//!
//! `N_FFT = 256` is a power of two, so a plain Cooley–Tukey kernel covers
//! everything the preprocessing chain needs. Correctness is pinned against
//! the naive DFT summation in [`crate::dsp::reference`].

use num_complex::Complex64;

/// In-place forward FFT (negative-exponent convention).
/// `buf.len()` must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            buf.swap(i, j);
        }
    }

    // Butterfly stages with per-stage twiddle recurrence.
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let angle = -2.0 * std::f64::consts::PI / len as f64;
        let w_len = Complex64::new(angle.cos(), angle.sin());
        let mut start = 0;
        while start < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..half {
                let u = buf[start + k];
                let t = w * buf[start + k + half];
                buf[start + k] = u + t;
                buf[start + k + half] = u - t;
                w *= w_len;
            }
            start += len;
        }
        len <<= 1;
    }
}

/// Forward FFT of a real signal, returning the full complex spectrum.
pub fn fft_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}
