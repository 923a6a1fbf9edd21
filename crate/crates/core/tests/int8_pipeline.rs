//! Post-training quantization behavior: float/INT8 parity, calibration
//! coverage, budget accounting, and integer-path edge cases.

use std::sync::OnceLock;

use millmon_core::dsp::PreprocSettings;
use millmon_core::nn::{
    self, default_architecture, evaluate, evaluate_int8, forward_int8, forward_int8_trace,
    prepare_features, quantize_input, quantize_model, train, Activation, Conv2DSpec, LayerSpec,
    ModelArtifact, Padding, QuantLayerInfo, TrainConfig,
};
use millmon_core::quant::{QuantParams, QuantTensor};
use millmon_core::signals::{split_dataset, synth_dataset, Label, SynthConfig};
use millmon_core::{Error, Tensor};

struct Fixture {
    model: ModelArtifact,
    train_features: Vec<(Tensor, Label)>,
    test_features: Vec<(Tensor, Label)>,
}

/// One trained + quantized model shared by the tests in this file.
fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let synth = SynthConfig {
            seed: 99,
            ..SynthConfig::default()
        };
        let samples = synth_dataset(&synth, 80, 80).unwrap();
        let split = split_dataset(samples, 0.75, 99, true).unwrap();
        let cfg = TrainConfig {
            max_epochs: 40,
            seed: 99,
            ..TrainConfig::default()
        };
        let settings = PreprocSettings::default();
        let (mut model, _) = train(&default_architecture(), &split, &cfg, &settings).unwrap();
        let train_features = prepare_features(&split.train, &settings).unwrap();
        let test_features = prepare_features(&split.test, &settings).unwrap();
        // 64 calibration inputs, deterministically strided from the training set.
        let calib: Vec<Tensor> = train_features
            .iter()
            .step_by(2)
            .take(64)
            .map(|(x, _)| x.clone())
            .collect();
        quantize_model(&mut model, &calib).unwrap();
        Fixture {
            model,
            train_features,
            test_features,
        }
    })
}

#[test]
fn int8_matches_float_accuracy_on_separable_data() {
    let fx = fixture();
    let float_acc = evaluate(&fx.model, &fx.test_features).unwrap();
    let int8_acc = evaluate_int8(&fx.model, &fx.test_features).unwrap();
    assert_eq!(float_acc, 1.0);
    assert_eq!(int8_acc, float_acc);
}

#[test]
fn int8_argmax_matches_float_argmax_per_sample() {
    let fx = fixture();
    for (x, _) in &fx.test_features {
        let float_class = fx.model.predict(x).unwrap();
        let q = quantize_input(&fx.model, x).unwrap();
        let int_class = forward_int8(&fx.model, &q).unwrap().class;
        assert_eq!(int_class, float_class);
    }
}

#[test]
fn quantized_parameter_bytes_fit_the_budget() {
    let fx = fixture();
    let q = fx.model.quant.as_ref().unwrap();
    assert_eq!(q.param_bytes(), 7760);
    assert!(q.param_bytes() <= nn::PARAM_BUDGET_BYTES);
    assert_eq!(fx.model.metadata.get("param_bytes").unwrap(), "7760");
}

#[test]
fn every_tensor_carries_quant_params() {
    let fx = fixture();
    let q = fx.model.quant.as_ref().unwrap();
    assert!(q.input.scale > 0.0);
    assert_eq!(q.layers.len(), fx.model.layers.len());
    for (layer, info) in fx.model.layers.iter().zip(&q.layers) {
        match (layer.is_trainable(), info) {
            (true, QuantLayerInfo::Weighted { weights, output, .. }) => {
                assert!(weights.scale > 0.0);
                assert_eq!(weights.zero_point, 0, "weights are symmetric");
                assert!(output.scale > 0.0);
            }
            (false, QuantLayerInfo::Passthrough { output }) => {
                assert!(output.scale > 0.0);
            }
            (trainable, info) => panic!("mismatched table: trainable={trainable} info={info:?}"),
        }
    }
}

#[test]
fn calibration_ranges_cover_full_training_set() {
    let fx = fixture();
    let q = fx.model.quant.as_ref().unwrap();

    // Fraction of activation values (over all weighted layers) that the
    // calibrated ranges represent without clamping, measured over the whole
    // training set.
    let mut inside = 0usize;
    let mut total = 0usize;
    for (x, _) in &fx.train_features {
        let outputs = fx.model.forward_all(x).unwrap();
        for (info, out) in q.layers.iter().zip(&outputs) {
            if let QuantLayerInfo::Weighted { output, .. } = info {
                let (lo, hi) = output.representable_range();
                for &v in out.data() {
                    total += 1;
                    if v >= lo && v <= hi {
                        inside += 1;
                    }
                }
            }
        }
    }
    let coverage = inside as f64 / total as f64;
    assert!(coverage >= 0.99, "coverage {coverage}");
}

#[test]
fn all_zero_weight_tensor_quantizes_to_zero() {
    let arch = vec![
        LayerSpec::Conv2D(Conv2DSpec {
            kh: 3,
            kw: 3,
            c_in: 3,
            c_out: 2,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::None,
        }),
        LayerSpec::Flatten,
        LayerSpec::Softmax,
    ];
    let mut model = ModelArtifact::initialized(arch, [4, 65, 3], 1).unwrap();
    model.weights[0].as_mut().unwrap().w.data_mut().fill(0.0);
    let calib = vec![Tensor::from_vec(&[4, 65, 3], vec![0.5; 780])];
    quantize_model(&mut model, &calib).unwrap();
    match &model.quant.as_ref().unwrap().layers[0] {
        QuantLayerInfo::Weighted {
            weights, q_weights, ..
        } => {
            assert_eq!(weights.scale, millmon_core::quant::SCALE_FLOOR);
            assert!(q_weights.iter().all(|&q| q == 0));
        }
        other => panic!("expected weighted layer, got {other:?}"),
    }
}

#[test]
fn zero_input_runs_cleanly() {
    let fx = fixture();
    let zp = fx.model.quant.as_ref().unwrap().input.zero_point as i8;
    let q = QuantTensor {
        shape: vec![4, 65, 3],
        values: vec![zp; 780],
        params: fx.model.quant.as_ref().unwrap().input,
    };
    let out = forward_int8(&fx.model, &q).unwrap();
    assert_eq!(out.scores.len(), 2);
    assert!(out.class < 2);
}

#[test]
fn random_conv_layer_int_path_tracks_float_path() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(55);

    let arch = vec![LayerSpec::Conv2D(Conv2DSpec {
        kh: 3,
        kw: 3,
        c_in: 2,
        c_out: 2,
        stride: 1,
        padding: Padding::Same,
        activation: Activation::None,
    })];
    let mut model = ModelArtifact::initialized(arch, [4, 4, 2], 55).unwrap();
    {
        let lw = model.weights[0].as_mut().unwrap();
        for v in lw.w.data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for b in lw.b.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let calib: Vec<Tensor> = (0..16)
        .map(|_| {
            Tensor::from_vec(
                &[4, 4, 2],
                (0..32).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    quantize_model(&mut model, &calib).unwrap();

    let out_scale = match &model.quant.as_ref().unwrap().layers[0] {
        QuantLayerInfo::Weighted { output, .. } => output.scale,
        _ => unreachable!(),
    };

    for x in calib.iter().take(8) {
        let float_out = &model.forward_all(x).unwrap()[0];
        let q_in = quantize_input(&model, x).unwrap();
        let (_, trace) = forward_int8_trace(&model, &q_in).unwrap();
        let int_out = &trace[0];
        assert_eq!(int_out.values.len(), float_out.len());
        for (q, f) in int_out.values.iter().zip(float_out.data()) {
            let dequant = int_out.params.dequantize_value(*q);
            assert!(
                (dequant - f).abs() <= 2.0 * out_scale,
                "{dequant} vs {f} (scale {out_scale})"
            );
        }
    }
}

#[test]
fn quantize_requires_weights_and_calibration() {
    let mut model =
        ModelArtifact::initialized(default_architecture(), nn::INPUT_SHAPE, 1).unwrap();
    assert!(matches!(
        quantize_model(&mut model, &[]),
        Err(Error::EmptyInput(_))
    ));
    model.weights[0] = None;
    let calib = vec![Tensor::from_vec(&[4, 65, 3], vec![0.1; 780])];
    assert!(quantize_model(&mut model, &calib).is_err());
}

#[test]
fn forward_int8_requires_quantization() {
    let model =
        ModelArtifact::initialized(default_architecture(), nn::INPUT_SHAPE, 1).unwrap();
    let q = QuantTensor {
        shape: vec![4, 65, 3],
        values: vec![0; 780],
        params: QuantParams::new(0.1, 0),
    };
    assert!(matches!(
        forward_int8(&model, &q),
        Err(Error::NotQuantized)
    ));
}

#[test]
fn quantized_model_survives_container_roundtrip() {
    let fx = fixture();
    let bytes = fx.model.to_bytes();
    let loaded = ModelArtifact::from_bytes(&bytes, std::path::Path::new("mem")).unwrap();
    assert_eq!(loaded.quant, fx.model.quant);
    // Integer inference after reload is bit-identical: quant tables are
    // stored exactly.
    for (x, _) in fx.test_features.iter().take(10) {
        let q = quantize_input(&fx.model, x).unwrap();
        let a = forward_int8(&fx.model, &q).unwrap();
        let b = forward_int8(&loaded, &q).unwrap();
        assert_eq!(a, b);
    }
}
