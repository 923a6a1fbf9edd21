//! Declarative run configuration: a single TOML file whose defaults
//! reproduce the reference constants (split ratio 0.783, Tukey alpha 0.5,
//! batch size 16, learning rate 5e-4 with 0.95 decay every 50 steps, ...).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use millmon_core::dsp::{NormScope, PreprocSettings};
use millmon_core::nn::TrainConfig;
use millmon_core::signals::{ChatterBand, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_good: usize,
    pub n_bad: usize,
    pub base_freq_hz: f64,
    pub n_inserts: u32,
    pub harmonic_amps: Vec<f64>,
    pub chatter_low_hz: f64,
    pub chatter_high_hz: f64,
    pub chatter_amp: f64,
    pub noise_floor: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        // 698 good + 415 bad = 1113 samples; at ratio 0.783 the split is
        // exactly 872 train / 241 test.
        SynthSection {
            n_good: 698,
            n_bad: 415,
            base_freq_hz: 50.0,
            n_inserts: 2,
            harmonic_amps: vec![1.0, 0.6, 0.3],
            chatter_low_hz: 1200.0,
            chatter_high_hz: 2000.0,
            chatter_amp: 0.7,
            noise_floor: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub ratio: f64,
    pub stratified: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection {
            ratio: 0.783,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub tukey_alpha: f64,
    pub log_eps: f64,
    pub per_axis_normalize: bool,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        PreprocessSection {
            tukey_alpha: 0.5,
            log_eps: 1e-12,
            per_axis_normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub decay_every_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub val_fraction: f64,
    pub calibration_samples: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_size: 16,
            max_epochs: 200,
            patience: 5,
            lr0: 5e-4,
            lr_decay: 0.95,
            decay_every_steps: 50,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            val_fraction: 0.15,
            calibration_samples: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub reps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_infer_s: Option<f64>,
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            reps: 31,
            trace: None,
            t_infer_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub synth: SynthSection,
    pub split: SplitSection,
    pub preprocess: PreprocessSection,
    pub train: TrainSection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out_dir: PathBuf::from("artifacts"),
            synth: SynthSection::default(),
            split: SplitSection::default(),
            preprocess: PreprocessSection::default(),
            train: TrainSection::default(),
            bench: BenchSection::default(),
        }
    }
}

/// One configuration problem, with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// SHA-256 of the canonical TOML form; embedded in artifacts for
    /// provenance.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Check every invariant; returns one violation per breached field.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        let mut fail = |field: &str, message: String| {
            violations.push(Violation {
                field: field.to_string(),
                message,
            });
        };

        if self.synth.n_good + self.synth.n_bad == 0 {
            fail("synth.n_good", "n_good + n_bad must be >= 1".into());
        }
        if let Err(e) = self.synth_config().validate() {
            fail("synth", e.to_string());
        }
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            fail(
                "split.ratio",
                format!("{} is outside (0, 1)", self.split.ratio),
            );
        }
        if !(0.0..=1.0).contains(&self.preprocess.tukey_alpha) {
            fail(
                "preprocess.tukey_alpha",
                format!("{} is outside [0, 1]", self.preprocess.tukey_alpha),
            );
        }
        if !(self.preprocess.log_eps > 0.0) {
            fail(
                "preprocess.log_eps",
                format!("{} must be positive", self.preprocess.log_eps),
            );
        }
        if let Err(e) = self.train_config().validate() {
            fail("train", e.to_string());
        }
        if self.train.calibration_samples == 0 {
            fail(
                "train.calibration_samples",
                "must be >= 1".into(),
            );
        }
        if self.bench.reps < 3 {
            fail("bench.reps", format!("{} must be >= 3", self.bench.reps));
        }
        if let Some(t) = self.bench.t_infer_s {
            if !(t > 0.0) {
                fail("bench.t_infer_s", format!("{t} must be positive"));
            }
        }
        violations
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            base_freq: self.synth.base_freq_hz,
            n_inserts: self.synth.n_inserts,
            harmonic_amps: self.synth.harmonic_amps.clone(),
            chatter: ChatterBand {
                low_hz: self.synth.chatter_low_hz,
                high_hz: self.synth.chatter_high_hz,
                amplitude: self.synth.chatter_amp,
            },
            noise_floor: self.synth.noise_floor,
            seed: self.seed,
            ..SynthConfig::default()
        }
    }

    pub fn preproc_settings(&self) -> PreprocSettings {
        PreprocSettings {
            tukey_alpha: self.preprocess.tukey_alpha,
            log_eps: self.preprocess.log_eps,
            norm_scope: if self.preprocess.per_axis_normalize {
                NormScope::PerAxis
            } else {
                NormScope::Joint
            },
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            patience: self.train.patience,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            epsilon: self.train.epsilon,
            lr0: self.train.lr0,
            lr_decay: self.train.lr_decay,
            decay_every_steps: self.train.decay_every_steps,
            seed: self.seed,
            val_fraction: self.train.val_fraction,
        }
    }
}
