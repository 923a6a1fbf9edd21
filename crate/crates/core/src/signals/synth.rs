//! Deterministic synthetic vibration samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Label, Origin, SynthConfig, TimeSeries, TimeSeriesSample};
use crate::error::Result;

/// Sinusoids used to fill the chatter band.
const CHATTER_TONES: usize = 32;

/// Per-axis gain jitter range around 1.0.
const AXIS_GAIN_JITTER: f64 = 0.3;

/// RNG stream keyed by (seed, class, index): distinct inputs yield
/// independent deterministic streams, so synthesis may run in any order.
fn stream_rng(cfg: &SynthConfig, label: Label, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream((index << 1) | label.index() as u64);
    rng
}

/// Generate one labeled 1-second sample.
///
/// Good samples contain the tooth-pass harmonics plus the noise floor; Bad
/// samples additionally carry band-limited chatter energy. The result is
/// bit-identical for identical `(label, cfg.seed, index)`.
pub fn synth_sample(label: Label, cfg: &SynthConfig, index: u64) -> Result<TimeSeriesSample> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg, label, index);
    let n = cfg.sample_rate as usize;
    let dt = 1.0 / cfg.sample_rate as f64;
    let tooth_freq = cfg.base_freq * cfg.n_inserts as f64;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut axes: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for axis in axes.iter_mut() {
        let gain: f64 = rng.random_range(1.0 - AXIS_GAIN_JITTER..1.0 + AXIS_GAIN_JITTER);

        for (k, &amp) in cfg.harmonic_amps.iter().enumerate() {
            let freq = tooth_freq * (k + 1) as f64;
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            if amp == 0.0 {
                continue;
            }
            let omega = std::f64::consts::TAU * freq;
            for (i, v) in axis.iter_mut().enumerate() {
                *v += gain * amp * (omega * i as f64 * dt + phase).sin();
            }
        }

        if label == Label::Bad && cfg.chatter.amplitude > 0.0 {
            let tone_amp = gain * cfg.chatter.amplitude / (CHATTER_TONES as f64).sqrt();
            for _ in 0..CHATTER_TONES {
                let freq: f64 = rng.random_range(cfg.chatter.low_hz..cfg.chatter.high_hz);
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let omega = std::f64::consts::TAU * freq;
                for (i, v) in axis.iter_mut().enumerate() {
                    *v += tone_amp * (omega * i as f64 * dt + phase).sin();
                }
            }
        }

        if cfg.noise_floor > 0.0 {
            for v in axis.iter_mut() {
                *v += cfg.noise_floor * normal.sample(&mut rng);
            }
        }
    }

    let origin = Origin {
        source: format!("synth-{label}-{index}"),
        segment: 0,
        window: 0,
    };
    TimeSeriesSample::new(TimeSeries::new(axes, cfg.sample_rate)?, label, origin)
}

/// Generate `n_good` Good and `n_bad` Bad samples with per-index streams.
pub fn synth_dataset(cfg: &SynthConfig, n_good: usize, n_bad: usize) -> Result<Vec<TimeSeriesSample>> {
    let mut out = Vec::with_capacity(n_good + n_bad);
    for i in 0..n_good {
        out.push(synth_sample(Label::Good, cfg, i as u64)?);
    }
    for i in 0..n_bad {
        out.push(synth_sample(Label::Bad, cfg, i as u64)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::reference::dft_magnitudes;

    fn bits(sample: &TimeSeriesSample) -> Vec<u64> {
        sample
            .series()
            .axes()
            .iter()
            .flat_map(|a| a.iter().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn identical_inputs_give_bit_identical_samples() {
        let cfg = SynthConfig::default();
        let a = synth_sample(Label::Bad, &cfg, 7).unwrap();
        let b = synth_sample(Label::Bad, &cfg, 7).unwrap();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn distinct_indices_differ() {
        let cfg = SynthConfig::default();
        let a = synth_sample(Label::Good, &cfg, 0).unwrap();
        let b = synth_sample(Label::Good, &cfg, 1).unwrap();
        assert_ne!(bits(&a), bits(&b));
    }

    #[test]
    fn pure_harmonic_peaks_only_at_tooth_pass_bins() {
        // One harmonic, no noise: with a 1-second window the 100 Hz tone
        // lands exactly on DFT bin 100; every other bin must be empty.
        let cfg = SynthConfig {
            harmonic_amps: vec![1.0],
            noise_floor: 0.0,
            ..SynthConfig::default()
        };
        let tooth_bin = (cfg.base_freq * cfg.n_inserts as f64) as usize;
        let sample = synth_sample(Label::Good, &cfg, 3).unwrap();
        for axis in sample.series().axes() {
            let mags = dft_magnitudes(axis);
            let n = mags.len();
            let peak = mags[tooth_bin];
            assert!(peak > 1.0, "expected energy at bin {tooth_bin}");
            for (k, &m) in mags.iter().enumerate() {
                if k == tooth_bin || k == n - tooth_bin {
                    continue;
                }
                assert!(
                    m < peak * 1e-6,
                    "unexpected energy at bin {k}: {m} (peak {peak})"
                );
            }
        }
    }

    #[test]
    fn bad_sample_has_higher_chatter_band_ratio() {
        let cfg = SynthConfig::default();
        let good = synth_sample(Label::Good, &cfg, 5).unwrap();
        let bad = synth_sample(Label::Bad, &cfg, 5).unwrap();

        // Band-energy oracle: DFT magnitude energy inside the chatter band
        // versus outside it, summed over axes.
        let band_ratio = |s: &TimeSeriesSample| {
            let lo = cfg.chatter.low_hz as usize;
            let hi = cfg.chatter.high_hz as usize;
            let mut inside = 0.0;
            let mut outside = 0.0;
            for axis in s.series().axes() {
                let mags = dft_magnitudes(axis);
                for (k, &m) in mags.iter().enumerate().take(mags.len() / 2) {
                    let e = m * m;
                    if (lo..=hi).contains(&k) {
                        inside += e;
                    } else {
                        outside += e;
                    }
                }
            }
            inside / outside
        };

        let rg = band_ratio(&good);
        let rb = band_ratio(&bad);
        assert!(rb > rg * 10.0, "bad ratio {rb} vs good ratio {rg}");
    }

    #[test]
    fn invalid_configs_rejected() {
        let cfg = SynthConfig {
            base_freq: 5000.0,
            ..SynthConfig::default()
        };
        assert!(synth_sample(Label::Good, &cfg, 0).is_err());
        let cfg = SynthConfig {
            harmonic_amps: vec![1.0; 50],
            ..SynthConfig::default()
        };
        assert!(synth_sample(Label::Good, &cfg, 0).is_err());
        let cfg = SynthConfig {
            chatter: ChatterBand {
                low_hz: 3000.0,
                high_hz: 2000.0,
                amplitude: 0.5,
            },
            ..SynthConfig::default()
        };
        assert!(synth_sample(Label::Bad, &cfg, 0).is_err());
    }

    use crate::signals::ChatterBand;
}
