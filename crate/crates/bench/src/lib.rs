//! Shared fixtures for the criterion benchmarks.

use millmon_core::dsp::{self, PreprocSettings};
use millmon_core::nn::{default_architecture, quantize_model, ModelArtifact, INPUT_SHAPE};
use millmon_core::signals::{synth_sample, Label, SynthConfig, TimeSeriesSample};
use millmon_core::Tensor;

/// One deterministic Bad-class sample.
pub fn fixture_sample() -> TimeSeriesSample {
    synth_sample(Label::Bad, &SynthConfig::default(), 0).expect("synth")
}

/// A quantized model with seeded random weights; calibration runs over a few
/// synthetic feature maps. Benchmarks measure inference, not accuracy, so no
/// training is needed.
pub fn fixture_model() -> ModelArtifact {
    let mut model =
        ModelArtifact::initialized(default_architecture(), INPUT_SHAPE, 1).expect("init");
    let settings = PreprocSettings::default();
    let cfg = SynthConfig::default();
    let calib: Vec<Tensor> = (0..8)
        .map(|i| {
            let s = synth_sample(Label::Good, &cfg, i).expect("synth");
            dsp::to_cnn_input(&dsp::preprocess(&s, &settings).expect("preprocess"))
        })
        .collect();
    quantize_model(&mut model, &calib).expect("quantize");
    model
}
