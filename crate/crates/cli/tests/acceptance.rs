//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with the measured values (visible with `--nocapture`).
//!
//! Run with: `cargo test -p millmon-cli --test acceptance -- --nocapture`

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use millmon_cli::config::RunConfig;
use millmon_cli::pipeline::run_pipeline;
use millmon_core::bench::{energy_from_trace, time_stages, PowerTrace, Stage};
use millmon_core::dsp::{
    self, avg_pool, preprocess, reference, spectrogram, tukey, PreprocSettings, BINS, FRAMES, HOP,
    NFFT, POOL_F, POOL_T,
};
use millmon_core::nn::{
    self, conv2d_backward, conv2d_forward, default_architecture, dense_backward, dense_forward,
    param_budget, quantize_model, Activation, Conv2DSpec, DenseSpec, ModelArtifact, Padding,
    TrainConfig,
};
use millmon_core::quant::{calibrate, QuantParams};
use millmon_core::signals::{
    split_dataset, synth_sample, Label, Origin, SynthConfig, TimeSeries, TimeSeriesSample,
    SAMPLE_LEN, SAMPLE_RATE,
};
use millmon_core::Tensor;

fn pass(name: &str, detail: &str) {
    println!("[acceptance] {name}: PASS ({detail})");
}

/// Shape chain: 3×8000 → 3×32×129 → 3×4×65, in under a second per sample.
#[test]
fn shape_chain_is_paper_exact() {
    let sample = synth_sample(Label::Bad, &SynthConfig::default(), 0).unwrap();
    assert_eq!(sample.series().len(), 8000);

    let start = Instant::now();
    let win = tukey(NFFT, 0.5).unwrap();
    let spec = spectrogram(&sample, &win).unwrap();
    assert_eq!(spec.data.shape(), &[3, 32, 129]);
    let pooled = avg_pool(&spec.data, POOL_T, POOL_F);
    assert_eq!(pooled.shape(), &[3, 4, 65]);
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "preprocessing took {elapsed:?}"
    );

    // Full preprocess agrees on the final shape.
    let features = preprocess(&sample, &PreprocSettings::default()).unwrap();
    assert_eq!(features.data.shape(), &[3, 4, 65]);
    pass(
        "shape chain",
        &format!("3x32x129 -> 3x4x65 in {:.2} ms", elapsed.as_secs_f64() * 1e3),
    );
}

/// FFT spectrogram vs the naive DFT summation: ≥100 random frames within
/// 1e-4 relative error per bin.
#[test]
fn stft_matches_naive_dft_oracle() {
    let win = tukey(NFFT, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut frames_checked = 0usize;
    let mut max_rel = 0.0f64;
    for _ in 0..4 {
        let x: Vec<f64> = (0..SAMPLE_LEN).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = dsp::spectrogram_axis(&x, &win).unwrap();
        for n in 0..FRAMES {
            let frame = &x[n * HOP..n * HOP + NFFT];
            let oracle = reference::naive_frame_magnitudes(frame, win.coefficients());
            for k in 0..BINS {
                let got = spec.data()[n * BINS + k];
                let want = oracle[k];
                let rel = (got - want).abs() / want.abs().max(1e-9);
                max_rel = max_rel.max(rel);
                assert!(rel <= 1e-4, "frame {n} bin {k}: rel {rel}");
            }
            frames_checked += 1;
        }
    }
    assert!(frames_checked >= 100);
    pass(
        "stft oracle",
        &format!("{frames_checked} frames, max relative error {max_rel:.2e}"),
    );
}

/// Quantization roundtrip bound over 10^6 random in-range values.
#[test]
fn quantization_roundtrip_bound_holds() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let param_sets = [
        calibrate(&[-1.0, 1.0], true).unwrap(),
        calibrate(&[-1.0, 1.0], false).unwrap(),
        calibrate(&[-12.0, 2.0], false).unwrap(),
        QuantParams::new(0.031, -17),
    ];
    let draws_per_set = 250_000usize;
    let mut violations = 0usize;
    let mut max_ratio = 0.0f64;
    for qp in &param_sets {
        let (lo, hi) = qp.representable_range();
        for _ in 0..draws_per_set {
            let x: f64 = rng.random_range(lo..hi);
            let err = (qp.dequantize_value(qp.quantize_value(x)) - x).abs();
            max_ratio = max_ratio.max(err / (qp.scale / 2.0));
            if err > qp.scale / 2.0 * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
    pass(
        "quantization bound",
        &format!(
            "{} draws, worst error {:.6} of scale/2, zero violations",
            param_sets.len() * draws_per_set,
            max_ratio
        ),
    );
}

mod gradients {
    use super::*;

    pub const H: f64 = 1e-4;

    pub fn close(analytic: f64, numeric: f64) -> bool {
        let diff = (analytic - numeric).abs();
        diff <= 1e-8 || diff <= 1e-3 * analytic.abs().max(numeric.abs())
    }

    pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor::from_vec(shape, data)
    }

    pub fn loss(out: &Tensor, coeffs: &Tensor) -> f64 {
        out.data()
            .iter()
            .zip(coeffs.data())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn kink_free(pre: &Tensor) -> bool {
        pre.data().iter().all(|v| v.abs() > 10.0 * H)
    }
}

/// Finite-difference gradient checks on ≥20 random instances per trainable
/// layer kind (h = 1e-4, relative tolerance 1e-3).
#[test]
fn gradient_suite_passes_finite_difference_checks() {
    use gradients::*;

    let mut rng = ChaCha8Rng::seed_from_u64(4040);
    let mut conv_instances = 0usize;
    let mut guard = 0usize;
    while conv_instances < 20 {
        guard += 1;
        assert!(guard < 400, "could not sample kink-free conv instances");
        let spec = Conv2DSpec {
            kh: 3,
            kw: 3,
            c_in: rng.random_range(1..3),
            c_out: rng.random_range(1..3),
            stride: 1,
            padding: if conv_instances % 2 == 0 {
                Padding::Same
            } else {
                Padding::Valid
            },
            activation: if conv_instances % 3 == 0 {
                Activation::None
            } else {
                Activation::Relu
            },
        };
        let h = rng.random_range(3..6);
        let w = rng.random_range(3..6);
        let x = random_tensor(&mut rng, &[h, w, spec.c_in]);
        let wt = random_tensor(&mut rng, &[spec.c_out, 3, 3, spec.c_in]);
        let b: Vec<f64> = (0..spec.c_out).map(|_| rng.random_range(-0.5..0.5)).collect();
        let pre = conv2d_forward(
            &x,
            &wt,
            &b,
            &Conv2DSpec {
                activation: Activation::None,
                ..spec
            },
        );
        if !kink_free(&pre) {
            continue;
        }
        conv_instances += 1;

        let out = conv2d_forward(&x, &wt, &b, &spec);
        let coeffs = random_tensor(&mut rng, out.shape());
        let (gw, gb, _) = conv2d_backward(&x, &wt, &out, &coeffs, &spec);
        for j in 0..wt.len() {
            let mut plus = wt.clone();
            plus.data_mut()[j] += H;
            let mut minus = wt.clone();
            minus.data_mut()[j] -= H;
            let numeric = (loss(&conv2d_forward(&x, &plus, &b, &spec), &coeffs)
                - loss(&conv2d_forward(&x, &minus, &b, &spec), &coeffs))
                / (2.0 * H);
            assert!(close(gw.data()[j], numeric), "conv w[{j}]");
        }
        for j in 0..b.len() {
            let mut plus = b.clone();
            plus[j] += H;
            let mut minus = b.clone();
            minus[j] -= H;
            let numeric = (loss(&conv2d_forward(&x, &wt, &plus, &spec), &coeffs)
                - loss(&conv2d_forward(&x, &wt, &minus, &spec), &coeffs))
                / (2.0 * H);
            assert!(close(gb[j], numeric), "conv b[{j}]");
        }
    }

    let mut dense_instances = 0usize;
    let mut guard = 0usize;
    while dense_instances < 20 {
        guard += 1;
        assert!(guard < 400, "could not sample kink-free dense instances");
        let spec = DenseSpec {
            n_in: rng.random_range(2..16),
            n_out: rng.random_range(1..8),
            activation: if dense_instances % 3 == 0 {
                Activation::None
            } else {
                Activation::Relu
            },
        };
        let x = random_tensor(&mut rng, &[spec.n_in]);
        let wt = random_tensor(&mut rng, &[spec.n_out, spec.n_in]);
        let b: Vec<f64> = (0..spec.n_out).map(|_| rng.random_range(-0.5..0.5)).collect();
        let pre = dense_forward(
            &x,
            &wt,
            &b,
            &DenseSpec {
                activation: Activation::None,
                ..spec
            },
        );
        if !kink_free(&pre) {
            continue;
        }
        dense_instances += 1;

        let out = dense_forward(&x, &wt, &b, &spec);
        let coeffs = random_tensor(&mut rng, out.shape());
        let (gw, gb, _) = dense_backward(&x, &wt, &out, &coeffs, &spec);
        for j in 0..wt.len() {
            let mut plus = wt.clone();
            plus.data_mut()[j] += H;
            let mut minus = wt.clone();
            minus.data_mut()[j] -= H;
            let numeric = (loss(&dense_forward(&x, &plus, &b, &spec), &coeffs)
                - loss(&dense_forward(&x, &minus, &b, &spec), &coeffs))
                / (2.0 * H);
            assert!(close(gw.data()[j], numeric), "dense w[{j}]");
        }
        for j in 0..b.len() {
            let mut plus = b.clone();
            plus[j] += H;
            let mut minus = b.clone();
            minus[j] -= H;
            let numeric = (loss(&dense_forward(&x, &wt, &plus, &spec), &coeffs)
                - loss(&dense_forward(&x, &wt, &minus, &spec), &coeffs))
                / (2.0 * H);
            assert!(close(gb[j], numeric), "dense b[{j}]");
        }
    }

    pass(
        "gradient suite",
        &format!("{conv_instances} conv + {dense_instances} dense instances"),
    );
}

/// Desk-scale parity: the paper-shaped synthetic dataset (698 good + 415
/// bad, split 872/241) trains to 100% float test accuracy, and the INT8
/// model maintains it. The whole run must stay under 10 minutes.
#[test]
fn parity_full_pipeline_at_desk_scale() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.out_dir = dir.path().join("artifacts");

    let outcome = run_pipeline(&cfg, true).expect("pipeline runs");
    let dataset = outcome.report.dataset.unwrap();
    assert_eq!(dataset.train, 872);
    assert_eq!(dataset.test, 241);
    assert!(dataset.train >= 800 && dataset.test >= 200);
    // Stratification keeps each class within one sample of the global ratio.
    assert!((dataset.train_good as f64 - 698.0 * 0.783).abs() <= 1.0);
    assert!((dataset.train_bad as f64 - 415.0 * 0.783).abs() <= 1.0);
    assert!(outcome.report.memory.param_bytes <= nn::PARAM_BUDGET_BYTES);
    assert_eq!(outcome.float_test_acc, 1.0, "float accuracy");
    assert_eq!(outcome.int8_test_acc, 1.0, "int8 accuracy");

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() <= 600,
        "pipeline took {elapsed:?}, budget is 10 minutes"
    );
    pass(
        "parity at desk scale",
        &format!(
            "872/241 split, float 100%, int8 100%, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

/// Parameter budget: the default quantized model fits 12,892 bytes.
#[test]
fn parameter_budget_is_met() {
    let arch = default_architecture();
    let bytes = param_budget(&arch);
    assert!(bytes <= nn::PARAM_BUDGET_BYTES);

    // And the actually-quantized tables agree.
    let mut model = ModelArtifact::initialized(arch, nn::INPUT_SHAPE, 5).unwrap();
    let calib: Vec<Tensor> = (0..4)
        .map(|i| {
            Tensor::from_vec(&[4, 65, 3], (0..780).map(|j| ((i * 780 + j) as f64).sin()).collect())
        })
        .collect();
    quantize_model(&mut model, &calib).unwrap();
    let stored = model.quant.as_ref().unwrap().param_bytes();
    assert_eq!(stored, bytes);
    assert!(stored <= nn::PARAM_BUDGET_BYTES);
    pass(
        "parameter budget",
        &format!("{bytes} bytes <= {}", nn::PARAM_BUDGET_BYTES),
    );
}

/// Energy model numerics against the reference operating point.
#[test]
fn energy_model_reproduces_reference_figures() {
    let trace = PowerTrace::constant(2.987 + 0.31807, 2.987, 1024, 10_000.0, 10.0).unwrap();

    let r = energy_from_trace(&trace, 0.0845).unwrap();
    let p_err = (r.p_avg - 0.0949).abs() / 0.0949;
    assert!(p_err < 0.005, "p_avg {} (err {p_err})", r.p_avg);
    let epi_err = (r.epi - 8.022e-3).abs() / 8.022e-3;
    assert!(epi_err < 0.005, "epi {} (err {epi_err})", r.epi);

    let r2 = energy_from_trace(&trace, 0.0154).unwrap();
    let epi2_err = (r2.epi - 1.462e-3).abs() / 1.462e-3;
    assert!(epi2_err < 0.005, "epi {} (err {epi2_err})", r2.epi);

    pass(
        "energy numerics",
        &format!(
            "p_avg {:.4} mW, epi {:.4}/{:.4} mJ (errors {:.2}%/{:.2}%/{:.2}%)",
            r.p_avg * 1e3,
            r.epi * 1e3,
            r2.epi * 1e3,
            p_err * 100.0,
            epi_err * 100.0,
            epi2_err * 100.0
        ),
    );
}

/// Split counts: 1113 samples at ratio 0.783 give exactly 872/241.
#[test]
fn split_counts_match_reference() {
    let make = |label: Label, i: usize| {
        let series = TimeSeries::new([vec![0.0], vec![0.0], vec![0.0]], 1).unwrap();
        TimeSeriesSample::new(
            series,
            label,
            Origin {
                source: format!("s{i}"),
                segment: 0,
                window: 0,
            },
        )
        .unwrap()
    };
    let mut samples = Vec::new();
    for i in 0..698 {
        samples.push(make(Label::Good, i));
    }
    for i in 698..1113 {
        samples.push(make(Label::Bad, i));
    }

    for stratified in [false, true] {
        let split = split_dataset(samples.clone(), 0.783, 42, stratified).unwrap();
        assert_eq!(split.train.len(), 872, "stratified={stratified}");
        assert_eq!(split.test.len(), 241, "stratified={stratified}");
    }
    pass("split counts", "1113 @ 0.783 -> 872/241 (plain and stratified)");
}

/// Two full pipeline runs with one configuration produce byte-identical
/// model containers.
#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.synth.n_good = 80;
    cfg.synth.n_bad = 80;
    cfg.train.max_epochs = 30;
    cfg.bench.reps = 3;
    cfg.out_dir = dir.path().join("artifacts");

    // Identical configuration twice, capturing the artifacts in between.
    let a = run_pipeline(&cfg, true).unwrap();
    let bytes_a = std::fs::read(&a.model_path).unwrap();
    let history_a = std::fs::read(&a.history_path).unwrap();
    let b = run_pipeline(&cfg, true).unwrap();
    let bytes_b = std::fs::read(&b.model_path).unwrap();
    assert_eq!(bytes_a, bytes_b, "model containers differ");
    assert_eq!(
        history_a,
        std::fs::read(&b.history_path).unwrap(),
        "training histories differ"
    );
    pass(
        "determinism",
        &format!("identical containers ({} bytes)", bytes_a.len()),
    );
}

/// The runtime report contains exactly the seven pipeline stages in order.
/// Host-absolute times are intentionally not compared to on-target figures.
#[test]
fn bench_report_structure_matches_reference_table() {
    let mut model = ModelArtifact::initialized(default_architecture(), nn::INPUT_SHAPE, 9).unwrap();
    let settings = PreprocSettings::default();
    let synth = SynthConfig::default();
    let calib: Vec<Tensor> = (0..4)
        .map(|i| {
            let s = synth_sample(Label::Good, &synth, i).unwrap();
            dsp::to_cnn_input(&preprocess(&s, &settings).unwrap())
        })
        .collect();
    quantize_model(&mut model, &calib).unwrap();

    let sample = synth_sample(Label::Bad, &synth, 0).unwrap();
    let timings = time_stages(&sample, &model, &settings, 5).unwrap();
    let stages: Vec<Stage> = timings.stages.iter().map(|(s, _)| *s).collect();
    assert_eq!(stages, Stage::ALL.to_vec());
    assert_eq!(stages.len(), 7);
    // No assertion on absolute values: host milliseconds are not comparable
    // to the reference hardware.
    pass(
        "bench structure",
        "7 stages in pipeline order; absolute times not compared",
    );
}

// Keep the constant referenced so drift in the sampling rate is caught here.
#[test]
fn sample_rate_constant_is_8_khz() {
    assert_eq!(SAMPLE_RATE, 8000);
    assert_eq!(SAMPLE_LEN, 8000);
    let cfg = TrainConfig::default();
    assert_eq!(cfg.batch_size, 16);
    assert_eq!(cfg.max_epochs, 200);
    assert_eq!(cfg.patience, 5);
    assert_eq!(cfg.lr0, 5e-4);
    assert_eq!(cfg.lr_decay, 0.95);
    assert_eq!(cfg.decay_every_steps, 50);
    pass(
        "protocol constants",
        "8 kHz, batch 16, 200 epochs, patience 5, lr 5e-4 x 0.95^(t/50)",
    );
}
