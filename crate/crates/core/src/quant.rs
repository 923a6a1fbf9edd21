//! Affine signed 8-bit quantization.
//!
//! Values are mapped to INT8 as `q = clamp(round(x / scale) + zero_point)`
//! with round-half-away-from-zero, and recovered as
//! `x̂ = scale * (q - zero_point)`. Calibration derives `(scale, zero_point)`
//! from the observed value range: asymmetric for activations and inputs,
//! symmetric (zero_point = 0) for weights. [`Requantizer`] carries the
//! 32-bit fixed-point multiplier used to rescale integer accumulators
//! without floating-point arithmetic.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const QMIN: i32 = -128;
pub const QMAX: i32 = 127;

/// Scale floor applied when a calibration range is degenerate (all values equal).
pub const SCALE_FLOOR: f64 = 1e-8;

/// Per-tensor affine quantization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: i32,
}

impl QuantParams {
    pub fn new(scale: f64, zero_point: i32) -> Self {
        assert!(scale > 0.0, "scale must be positive");
        assert!(
            (QMIN..=QMAX).contains(&zero_point),
            "zero point must be representable"
        );
        QuantParams { scale, zero_point }
    }

    /// Quantize a single value with saturation.
    #[inline]
    pub fn quantize_value(&self, x: f64) -> i8 {
        let q = round_half_away(x / self.scale) + self.zero_point as i64;
        q.clamp(QMIN as i64, QMAX as i64) as i8
    }

    #[inline]
    pub fn dequantize_value(&self, q: i8) -> f64 {
        self.scale * (q as i32 - self.zero_point) as f64
    }

    /// Smallest and largest representable real values.
    pub fn representable_range(&self) -> (f64, f64) {
        (
            self.scale * (QMIN - self.zero_point) as f64,
            self.scale * (QMAX - self.zero_point) as f64,
        )
    }
}

#[inline]
fn round_half_away(x: f64) -> i64 {
    // f64::round ties away from zero, which is the contract here.
    x.round() as i64
}

/// Streaming min/max tracker for calibration over many tensors.
#[derive(Debug, Clone)]
pub struct RangeTracker {
    min: f64,
    max: f64,
    count: usize,
}

impl Default for RangeTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeTracker {
    pub fn new() -> Self {
        RangeTracker {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            count: 0,
        }
    }

    pub fn observe_value(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite("calibration value"));
        }
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.count += 1;
        Ok(())
    }

    pub fn observe(&mut self, values: &[f64]) -> Result<()> {
        for &x in values {
            self.observe_value(x)?;
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Derive quantization parameters from the observed range.
    ///
    /// Asymmetric: `scale = (max - min) / 255` with the zero point placed so
    /// that `min` maps to -128. Symmetric: `scale = max(|min|, |max|) / 127`
    /// with zero point 0. An all-equal range falls back to [`SCALE_FLOOR`].
    pub fn params(&self, symmetric: bool) -> Result<QuantParams> {
        if self.count == 0 {
            return Err(Error::EmptyInput("calibration set"));
        }
        if symmetric {
            let bound = self.min.abs().max(self.max.abs());
            let scale = if bound > 0.0 {
                bound / QMAX as f64
            } else {
                SCALE_FLOOR
            };
            Ok(QuantParams::new(scale, 0))
        } else {
            let span = self.max - self.min;
            if span <= 0.0 {
                return Ok(QuantParams::new(SCALE_FLOOR, 0));
            }
            let scale = span / (QMAX - QMIN) as f64;
            let zp = QMIN as i64 - round_half_away(self.min / scale);
            Ok(QuantParams::new(
                scale,
                zp.clamp(QMIN as i64, QMAX as i64) as i32,
            ))
        }
    }
}

/// Derive quantization parameters from a value collection.
pub fn calibrate(values: &[f64], symmetric: bool) -> Result<QuantParams> {
    let mut tracker = RangeTracker::new();
    tracker.observe(values)?;
    tracker.params(symmetric)
}

/// A signed 8-bit tensor together with its quantization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantTensor {
    pub shape: Vec<usize>,
    pub values: Vec<i8>,
    pub params: QuantParams,
}

impl QuantTensor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Quantize a float tensor. Non-finite entries are rejected.
pub fn quantize(x: &Tensor, params: QuantParams) -> Result<QuantTensor> {
    let mut values = Vec::with_capacity(x.len());
    for &v in x.data() {
        if !v.is_finite() {
            return Err(Error::NonFinite("quantization input"));
        }
        values.push(params.quantize_value(v));
    }
    Ok(QuantTensor {
        shape: x.shape().to_vec(),
        values,
        params,
    })
}

/// Map a quantized tensor back to floats: `x̂ = scale * (q - zero_point)`.
pub fn dequantize(q: &QuantTensor) -> Tensor {
    let data = q
        .values
        .iter()
        .map(|&v| q.params.dequantize_value(v))
        .collect();
    Tensor::from_vec(&q.shape, data)
}

/// Fixed-point multiplier `mult * 2^-shift` approximating a positive real
/// factor, applied to 32-bit accumulators with round-to-nearest
/// (ties away from zero). `mult` is normalized into `[2^30, 2^31)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Requantizer {
    mult: i32,
    shift: i32,
}

impl Requantizer {
    pub fn from_real(real: f64) -> Result<Self> {
        if !(real.is_finite() && real > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "requantization factor must be positive and finite, got {real}"
            )));
        }
        // Normalize real = frac * 2^exp with frac in [0.5, 1).
        let mut frac = real;
        let mut exp = 0i32;
        while frac >= 1.0 {
            frac /= 2.0;
            exp += 1;
        }
        while frac < 0.5 {
            frac *= 2.0;
            exp -= 1;
        }
        let mut mult = (frac * (1u64 << 31) as f64).round() as i64;
        if mult == 1i64 << 31 {
            mult >>= 1;
            exp += 1;
        }
        Ok(Requantizer {
            mult: mult as i32,
            shift: 31 - exp,
        })
    }

    /// Rescale an accumulator: `round(acc * mult * 2^-shift)`, saturating to i32.
    #[inline]
    pub fn apply(&self, acc: i32) -> i32 {
        let prod = acc as i64 * self.mult as i64;
        let v = if self.shift > 0 {
            let half = 1i64 << (self.shift - 1);
            if prod >= 0 {
                (prod + half) >> self.shift
            } else {
                -((-prod + half) >> self.shift)
            }
        } else {
            prod.saturating_mul(1i64 << (-self.shift))
        };
        v.clamp(i32::MIN as i64, i32::MAX as i64) as i32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn calibrate_symmetric_unit_range() {
        let qp = calibrate(&[-1.0, 0.3, 1.0], true).unwrap();
        assert_eq!(qp.scale, 1.0 / 127.0);
        assert_eq!(qp.zero_point, 0);
    }

    #[test]
    fn calibrate_all_zero_uses_floor() {
        let qp = calibrate(&[0.0, 0.0, 0.0], true).unwrap();
        assert_eq!(qp.scale, SCALE_FLOOR);
        assert_eq!(qp.zero_point, 0);
        let qp = calibrate(&[0.0; 4], false).unwrap();
        assert_eq!(qp.scale, SCALE_FLOOR);
        assert_eq!(qp.zero_point, 0);
    }

    #[test]
    fn calibrate_asymmetric_byte_range() {
        let values: Vec<f64> = vec![0.0, 100.0, 255.0];
        let qp = calibrate(&values, false).unwrap();
        assert_eq!(qp.scale, 1.0);
        assert_eq!(qp.zero_point, -128);
    }

    #[test]
    fn calibrate_rejects_empty_and_non_finite() {
        assert!(matches!(calibrate(&[], true), Err(Error::EmptyInput(_))));
        assert!(matches!(
            calibrate(&[1.0, f64::NAN], true),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_maps_to_zero_point() {
        let qp = QuantParams::new(0.05, 17);
        let t = Tensor::from_vec(&[1], vec![0.0]);
        let q = quantize(&t, qp).unwrap();
        assert_eq!(q.values[0] as i32, 17);
    }

    #[test]
    fn range_endpoint_maps_to_qmax() {
        let qp = QuantParams::new(0.02, 0);
        let t = Tensor::from_vec(&[1], vec![127.0 * 0.02]);
        let q = quantize(&t, qp).unwrap();
        assert_eq!(q.values[0], 127);
    }

    #[test]
    fn quantize_rejects_non_finite() {
        let qp = QuantParams::new(1.0, 0);
        let t = Tensor::from_vec(&[2], vec![1.0, f64::INFINITY]);
        assert!(matches!(quantize(&t, qp), Err(Error::NonFinite(_))));
    }

    #[test]
    fn dequantize_examples() {
        let qp = QuantParams::new(0.1, -128);
        assert_eq!(qp.dequantize_value(-128), 0.0);
        let qp = QuantParams::new(0.5, 3);
        assert_eq!(qp.dequantize_value(3), 0.0);
    }

    #[test]
    fn roundtrip_error_within_half_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let qp = calibrate(&[-2.0, 2.0], false).unwrap();
        let (lo, hi) = qp.representable_range();
        for _ in 0..10_000 {
            let x: f64 = rng.random_range(lo..hi);
            let q = qp.quantize_value(x);
            let err = (qp.dequantize_value(q) - x).abs();
            assert!(
                err <= qp.scale / 2.0 * (1.0 + 1e-12),
                "x={x} err={err} scale={}",
                qp.scale
            );
        }
    }

    #[test]
    fn saturation_clamps_instead_of_wrapping() {
        let qp = QuantParams::new(0.1, 0);
        assert_eq!(qp.quantize_value(1e9), 127);
        assert_eq!(qp.quantize_value(-1e9), -128);
    }

    #[test]
    fn requantizer_matches_float_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let real: f64 = 10f64.powf(rng.random_range(-6.0..0.5));
            let rq = Requantizer::from_real(real).unwrap();
            for _ in 0..50 {
                let acc: i32 = rng.random_range(-5_000_000..5_000_000);
                let want = (acc as f64 * real).round();
                let got = rq.apply(acc) as f64;
                // The fixed-point multiplier carries ~2^-31 relative error;
                // allow one count of slack around ties.
                assert!(
                    (got - want).abs() <= 1.0,
                    "real={real} acc={acc} got={got} want={want}"
                );
            }
        }
    }

    #[test]
    fn requantizer_rejects_bad_factor() {
        assert!(Requantizer::from_real(0.0).is_err());
        assert!(Requantizer::from_real(-1.0).is_err());
        assert!(Requantizer::from_real(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn prop_roundtrip_bound(values in proptest::collection::vec(-50.0f64..50.0, 1..64)) {
            // dequant(quant(x)) differs from clamp(x) by at most scale/2;
            // clamping matters for degenerate (floor-scale) calibrations.
            let qp = calibrate(&values, false).unwrap();
            let (lo, hi) = qp.representable_range();
            let t = Tensor::from_vec(&[values.len()], values.clone());
            let q = quantize(&t, qp).unwrap();
            let back = dequantize(&q);
            for (x, y) in values.iter().zip(back.data()) {
                let clamped = x.clamp(lo, hi);
                prop_assert!((clamped - y).abs() <= qp.scale / 2.0 * (1.0 + 1e-12));
            }
        }

        #[test]
        fn prop_monotonic(a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let qp = QuantParams::new(0.37, 5);
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(qp.quantize_value(lo) <= qp.quantize_value(hi));
        }

        #[test]
        fn prop_grid_roundtrip_exact(q in -128i32..=127, scale in 1e-6f64..10.0, zp in -128i32..=127) {
            // Values already on the quantization grid survive a quantize →
            // dequantize → quantize cycle exactly.
            let qp = QuantParams::new(scale, zp);
            let x = qp.scale * (q - zp) as f64;
            let q1 = qp.quantize_value(x);
            prop_assert_eq!(q1 as i32, q);
            let x1 = qp.dequantize_value(q1);
            prop_assert_eq!(qp.quantize_value(x1) as i32, q);
        }
    }
}
