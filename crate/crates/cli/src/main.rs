//! `millmon` — vibration-based milling process quality monitoring pipelines.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use millmon_cli::config::RunConfig;
use millmon_cli::pipeline::run_pipeline;
use millmon_core::bench::{energy_from_trace, report, time_stages, PowerTrace};
use millmon_core::dsp::export::write_feature_map;
use millmon_core::dsp::{preprocess, NormScope, PreprocSettings};
use millmon_core::nn::{
    evaluate, evaluate_int8, prepare_features, quantize_model, train, ModelArtifact,
};
use millmon_core::signals::io::{
    read_manifest, read_recording, read_sample, write_dataset, write_manifest, write_recording,
    ManifestEntry,
};
use millmon_core::signals::{
    segment_movements, split_dataset, synth_dataset, window_segment, Label, Origin, TimeSeries,
    TimeSeriesSample,
};
use millmon_core::Tensor;

#[derive(Parser)]
#[command(
    name = "millmon",
    version,
    about = "Vibration-based milling process quality monitoring: synthetic data, STFT features, INT8 CNN, latency/energy reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_label(s: &str) -> Result<Label, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic vibration dataset
    Synth {
        #[arg(long)]
        n_good: usize,
        #[arg(long)]
        n_bad: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory (receives sample files and manifest.tsv)
        #[arg(long)]
        out: PathBuf,
        /// Optional run config supplying the synth section
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Segment a continuous recording into linear-movement bursts
    Segment {
        /// Recording file (float32-LE triplets with a .meta sidecar)
        #[arg(long)]
        input: PathBuf,
        /// Sliding RMS window length in samples
        #[arg(long, default_value_t = 256)]
        rms_window: usize,
        /// RMS activity threshold
        #[arg(long)]
        threshold: f64,
        /// Directory for the extracted segment recordings
        #[arg(long)]
        out_dir: PathBuf,
        /// Label for 1-second windows; enables window + manifest emission
        #[arg(long, value_parser = parse_label)]
        label: Option<Label>,
        /// Manifest path for emitted windows (default <out-dir>/manifest.tsv)
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Split a dataset manifest into train/test manifests
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.783)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        stratified: bool,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Preprocess one 1-second sample into a feature-map export
    Prep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        /// Normalize each axis independently instead of jointly
        #[arg(long)]
        per_axis: bool,
    },
    /// Train the CNN on a dataset manifest
    Train {
        #[arg(long)]
        train_manifest: PathBuf,
        /// Run config supplying train/preprocess sections (defaults otherwise)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        model_out: PathBuf,
        #[arg(long)]
        history_out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Quantize a trained model using calibration samples
    Quantize {
        #[arg(long)]
        model: PathBuf,
        /// Manifest of calibration samples (typically the training set)
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 128)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Evaluate a model on a dataset manifest
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Use the INT8 path instead of float
        #[arg(long)]
        quantized: bool,
    },
    /// Per-stage runtime breakdown on one sample
    Bench {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 31)]
        reps: usize,
        /// Write the report CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the shunt-resistor energy model over a voltage trace
    Energy {
        #[arg(long)]
        trace: PathBuf,
        /// Inference duration in seconds
        #[arg(long)]
        t_infer: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline: synth, split, train, quantize, evaluate, bench
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Check a run configuration against every invariant
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth {
            n_good,
            n_bad,
            seed,
            out,
            config,
        } => {
            let mut run_cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            run_cfg.seed = seed;
            let samples = synth_dataset(&run_cfg.synth_config(), n_good, n_bad)?;
            let manifest = write_dataset(&out, &samples)?;
            println!(
                "wrote {} samples and {}",
                samples.len(),
                manifest.display()
            );
        }
        Command::Segment {
            input,
            rms_window,
            threshold,
            out_dir,
            label,
            manifest,
        } => {
            let recording = read_recording(&input)?;
            let segments = segment_movements(&recording, rms_window, threshold)?;
            std::fs::create_dir_all(&out_dir)?;
            let source = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "recording".into());
            let mut entries: Vec<ManifestEntry> = Vec::new();
            for (i, segment) in segments.iter().enumerate() {
                let seg_path = out_dir.join(format!("segment_{i:03}.f32"));
                write_recording(&seg_path, segment)?;
                if let Some(label) = label {
                    for window in window_segment(segment, label, &source, i as u32) {
                        let name = format!(
                            "window_{i:03}_{:03}_{}.f32",
                            window.origin().window,
                            label
                        );
                        write_recording(&out_dir.join(&name), window.series())?;
                        entries.push(ManifestEntry {
                            path: PathBuf::from(name),
                            label,
                            origin: window.origin().clone(),
                        });
                    }
                }
            }
            println!("{} segments", segments.len());
            if label.is_some() {
                let manifest_path = manifest.unwrap_or_else(|| out_dir.join("manifest.tsv"));
                write_manifest(&manifest_path, &entries)?;
                println!("{} windows -> {}", entries.len(), manifest_path.display());
            }
        }
        Command::Split {
            manifest,
            ratio,
            seed,
            stratified,
            train_out,
            test_out,
        } => {
            let entries = read_manifest(&manifest)?;
            // Split on placeholder samples carrying only label + origin; the
            // signal data never needs to leave disk.
            let placeholders: Result<Vec<TimeSeriesSample>> = entries
                .iter()
                .map(|e| {
                    let series = TimeSeries::new([vec![0.0], vec![0.0], vec![0.0]], 1)?;
                    Ok(TimeSeriesSample::new(series, e.label, e.origin.clone())?)
                })
                .collect();
            let split = split_dataset(placeholders?, ratio, seed, stratified)?;
            let by_origin = |origin: &Origin| -> ManifestEntry {
                entries
                    .iter()
                    .find(|e| &e.origin == origin)
                    .expect("origin came from the manifest")
                    .clone()
            };
            let train: Vec<ManifestEntry> =
                split.train.iter().map(|s| by_origin(s.origin())).collect();
            let test: Vec<ManifestEntry> =
                split.test.iter().map(|s| by_origin(s.origin())).collect();
            write_manifest(&train_out, &train)?;
            write_manifest(&test_out, &test)?;
            println!("train {} / test {}", train.len(), test.len());
        }
        Command::Prep {
            input,
            out,
            alpha,
            eps,
            per_axis,
        } => {
            let series = read_recording(&input)?;
            let sample = TimeSeriesSample::new(
                series,
                Label::Good,
                Origin {
                    source: input.display().to_string(),
                    segment: 0,
                    window: 0,
                },
            )?;
            let settings = PreprocSettings {
                tukey_alpha: alpha,
                log_eps: eps,
                norm_scope: if per_axis {
                    NormScope::PerAxis
                } else {
                    NormScope::Joint
                },
            };
            let features = preprocess(&sample, &settings)?;
            write_feature_map(&out, &features, &settings)?;
            println!("wrote {}", out.display());
        }
        Command::Train {
            train_manifest,
            config,
            model_out,
            history_out,
            seed,
        } => {
            let mut run_cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(seed) = seed {
                run_cfg.seed = seed;
            }
            let samples = load_samples(&train_manifest)?;
            let split = millmon_core::signals::DatasetSplit {
                train: samples,
                test: Vec::new(),
                seed: run_cfg.seed,
            };
            let (mut model, history) = train(
                &millmon_core::nn::default_architecture(),
                &split,
                &run_cfg.train_config(),
                &run_cfg.preproc_settings(),
            )?;
            model.set_metadata("config_hash", run_cfg.hash());
            model.save(&model_out)?;
            if let Some(history_out) = history_out {
                std::fs::write(&history_out, history.to_csv())?;
            }
            println!(
                "trained to epoch {} ({}); model -> {}",
                history.stopped_epoch,
                history.reason,
                model_out.display()
            );
        }
        Command::Quantize {
            model,
            calib,
            out,
            samples,
            seed,
        } => {
            let mut artifact = ModelArtifact::load(&model)?;
            let calib_samples = load_samples(&calib)?;
            let settings = artifact.preproc_settings();
            let features = prepare_features(&calib_samples, &settings)?;
            let mut indices: Vec<usize> = (0..features.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indices.shuffle(&mut rng);
            let calib_tensors: Vec<Tensor> = indices
                .into_iter()
                .take(samples.min(features.len()))
                .map(|i| features[i].0.clone())
                .collect();
            quantize_model(&mut artifact, &calib_tensors)?;
            artifact.save(&out)?;
            println!(
                "quantized with {} calibration samples; {} parameter bytes -> {}",
                calib_tensors.len(),
                artifact.quant.as_ref().map(|q| q.param_bytes()).unwrap_or(0),
                out.display()
            );
        }
        Command::Eval {
            model,
            manifest,
            quantized,
        } => {
            let artifact = ModelArtifact::load(&model)?;
            let samples = load_samples(&manifest)?;
            let features = prepare_features(&samples, &artifact.preproc_settings())?;
            let accuracy = if quantized {
                evaluate_int8(&artifact, &features)?
            } else {
                evaluate(&artifact, &features)?
            };
            println!(
                "{} accuracy: {accuracy:.4} ({} samples)",
                if quantized { "int8" } else { "float" },
                features.len()
            );
        }
        Command::Bench {
            sample,
            model,
            reps,
            out,
        } => {
            let artifact = ModelArtifact::load(&model)?;
            let series = read_recording(&sample)?;
            let sample = TimeSeriesSample::new(
                series,
                Label::Good,
                Origin {
                    source: sample.display().to_string(),
                    segment: 0,
                    window: 0,
                },
            )?;
            let settings = artifact.preproc_settings();
            let timings = time_stages(&sample, &artifact, &settings, reps)?;
            let bench_report = report(timings, None, &artifact)?;
            print!("{bench_report}");
            if let Some(out) = out {
                std::fs::write(&out, bench_report.to_csv())?;
                println!("report -> {}", out.display());
            }
        }
        Command::Energy { trace, t_infer, out } => {
            let power_trace = PowerTrace::read_csv(&trace)?;
            let energy = energy_from_trace(&power_trace, t_infer)?;
            println!("vdd_avg: {:.6} V", energy.vdd_avg);
            println!("idd_avg: {:.6} A", energy.idd_avg);
            println!("p_avg:   {:.6} W", energy.p_avg);
            println!("epi:     {:.6e} J", energy.epi);
            if let Some(out) = out {
                let csv = format!(
                    "metric,value\nvdd_avg_v,{}\nidd_avg_a,{}\np_avg_w,{}\nepi_j,{}\nt_infer_s,{}\n",
                    energy.vdd_avg, energy.idd_avg, energy.p_avg, energy.epi, energy.t_infer
                );
                std::fs::write(&out, csv)?;
                println!("energy report -> {}", out.display());
            }
        }
        Command::Run {
            config,
            seed,
            out_dir,
            quiet,
        } => {
            let mut run_cfg = match config {
                Some(path) => RunConfig::load(&path)?,
                None => RunConfig::default(),
            };
            if let Some(seed) = seed {
                run_cfg.seed = seed;
            }
            if let Some(out_dir) = out_dir {
                run_cfg.out_dir = out_dir;
            }
            let outcome = run_pipeline(&run_cfg, quiet)?;
            println!("model:   {}", outcome.model_path.display());
            println!("history: {}", outcome.history_path.display());
            println!("report:  {}", outcome.report_path.display());
            println!(
                "float test accuracy {:.4}, int8 test accuracy {:.4}",
                outcome.float_test_acc, outcome.int8_test_acc
            );
        }
        Command::Validate { config } => {
            let run_cfg = RunConfig::load(&config)?;
            let violations = run_cfg.validate();
            if violations.is_empty() {
                println!("ok");
            } else {
                for v in &violations {
                    eprintln!("violation: {v}");
                }
                bail!("{} violation(s)", violations.len());
            }
        }
    }
    Ok(())
}

fn load_samples(manifest: &PathBuf) -> Result<Vec<TimeSeriesSample>> {
    let entries = read_manifest(manifest)?;
    entries
        .iter()
        .map(|e| read_sample(e).with_context(|| format!("loading {}", e.path.display())))
        .collect()
}
