//! The full reproducible pipeline: synth → split → train → quantize →
//! evaluate → bench → report. Identical configurations produce byte-identical
//! model containers.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use millmon_core::bench::{
    energy_from_trace, report, time_stages, AccuracyReport, DatasetCounts, EnergyReport,
    PowerTrace, Report,
};
use millmon_core::nn::{
    default_architecture, evaluate, evaluate_int8, prepare_features, quantize_model, train,
};
use millmon_core::signals::{split_dataset, synth_dataset};
use millmon_core::Tensor;

use crate::config::RunConfig;

/// Artifacts and headline numbers of one pipeline run.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub report_path: PathBuf,
    pub float_test_acc: f64,
    pub int8_test_acc: f64,
    pub report: Report,
}

/// Execute the whole pipeline described by `cfg`.
///
/// Writes `model.bin`, `history.csv`, and `report.csv` into `cfg.out_dir`.
/// Any stage failure surfaces with the stage name attached.
pub fn run_pipeline(cfg: &RunConfig, quiet: bool) -> Result<PipelineOutcome> {
    let violations = cfg.validate();
    if !violations.is_empty() {
        let listing: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("invalid configuration:\n  {}", listing.join("\n  "));
    }
    let progress = |msg: &str| {
        if !quiet {
            eprintln!("[millmon] {msg}");
        }
    };

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating output directory {:?}", cfg.out_dir))?;

    progress(&format!(
        "synth: {} good + {} bad samples",
        cfg.synth.n_good, cfg.synth.n_bad
    ));
    let samples = synth_dataset(&cfg.synth_config(), cfg.synth.n_good, cfg.synth.n_bad)
        .context("stage synth")?;

    progress(&format!(
        "split: ratio {} (stratified: {})",
        cfg.split.ratio, cfg.split.stratified
    ));
    let split = split_dataset(samples, cfg.split.ratio, cfg.seed, cfg.split.stratified)
        .context("stage split")?;
    let ((train_good, train_bad), (test_good, test_bad)) = split.counts_by_label();
    let counts = DatasetCounts {
        train: split.train.len(),
        test: split.test.len(),
        train_good,
        train_bad,
        test_good,
        test_bad,
    };
    if split.test.is_empty() {
        bail!("stage split: test set is empty; adjust ratio or sample counts");
    }

    progress(&format!(
        "train: {} samples, batch {}, max {} epochs",
        counts.train, cfg.train.batch_size, cfg.train.max_epochs
    ));
    let settings = cfg.preproc_settings();
    let (mut model, history) = train(
        &default_architecture(),
        &split,
        &cfg.train_config(),
        &settings,
    )
    .context("stage train")?;
    progress(&format!(
        "train: stopped at epoch {} ({}), best epoch {}",
        history.stopped_epoch, history.reason, history.best_epoch
    ));

    let history_path = cfg.out_dir.join("history.csv");
    fs::write(&history_path, history.to_csv()).context("stage train: writing history")?;

    progress(&format!(
        "quantize: calibrating on {} training samples",
        cfg.train.calibration_samples
    ));
    let train_features = prepare_features(&split.train, &settings).context("stage quantize")?;
    let calib: Vec<Tensor> = {
        let mut indices: Vec<usize> = (0..train_features.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0xca11b);
        indices.shuffle(&mut rng);
        indices
            .into_iter()
            .take(cfg.train.calibration_samples.min(train_features.len()))
            .map(|i| train_features[i].0.clone())
            .collect()
    };
    quantize_model(&mut model, &calib).context("stage quantize")?;

    progress("evaluate: float and INT8 test accuracy");
    let test_features = prepare_features(&split.test, &settings).context("stage evaluate")?;
    let float_test_acc = evaluate(&model, &test_features).context("stage evaluate")?;
    let int8_test_acc = evaluate_int8(&model, &test_features).context("stage evaluate")?;
    progress(&format!(
        "evaluate: float {float_test_acc:.4}, int8 {int8_test_acc:.4}"
    ));

    progress(&format!("bench: {} reps", cfg.bench.reps));
    let timings = time_stages(&split.test[0], &model, &settings, cfg.bench.reps)
        .context("stage bench")?;

    let energy: Option<EnergyReport> = match &cfg.bench.trace {
        Some(path) => {
            let trace = PowerTrace::read_csv(path).context("stage energy")?;
            let t_infer = cfg
                .bench
                .t_infer_s
                .unwrap_or(timings.end_to_end_ns as f64 / 1e9);
            Some(energy_from_trace(&trace, t_infer).context("stage energy")?)
        }
        None => None,
    };

    model.set_metadata("config_hash", cfg.hash());
    let model_path = cfg.out_dir.join("model.bin");
    model.save(&model_path).context("stage report: saving model")?;

    let mut full_report = report(timings, energy, &model).context("stage report")?;
    full_report.dataset = Some(counts);
    full_report.accuracy = Some(AccuracyReport {
        float_test: float_test_acc,
        int8_test: int8_test_acc,
    });
    let report_path = cfg.out_dir.join("report.csv");
    fs::write(&report_path, full_report.to_csv()).context("stage report")?;

    if !quiet {
        eprintln!("{full_report}");
    }

    Ok(PipelineOutcome {
        model_path,
        history_path,
        report_path,
        float_test_acc,
        int8_test_acc,
        report: full_report,
    })
}
