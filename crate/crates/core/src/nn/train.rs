//! Float training: Adam with exponential step decay, seeded shuffling and
//! initialization, early stopping on validation accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{argmax, layers, param_budget, LayerSpec, ModelArtifact, PARAM_BUDGET_BYTES};
use crate::dsp::{preprocess_with_window, to_cnn_input, tukey, PreprocSettings, NFFT};
use crate::error::{Error, Result};
use crate::signals::{DatasetSplit, Label, TimeSeriesSample};
use crate::tensor::Tensor;

/// Training protocol parameters. Defaults: batch size 16, at most 200
/// epochs, patience 5, Adam(0.9, 0.999, 1e-7), initial learning rate 5e-4
/// decaying by 0.95 every 50 optimizer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lr0: f64,
    pub lr_decay: f64,
    pub decay_every_steps: usize,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            max_epochs: 200,
            patience: 5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            lr0: 5e-4,
            lr_decay: 0.95,
            decay_every_steps: 50,
            seed: 42,
            val_fraction: 0.15,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch_size must be >= 1");
        }
        if self.max_epochs == 0 {
            problems.push("max_epochs must be >= 1");
        }
        if self.patience == 0 || self.patience >= self.max_epochs {
            problems.push("patience must satisfy 0 < patience < max_epochs");
        }
        if !(self.lr0 > 0.0) {
            problems.push("lr0 must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            problems.push("lr_decay must be in (0, 1]");
        }
        if self.decay_every_steps == 0 {
            problems.push("decay_every_steps must be >= 1");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            problems.push("beta1/beta2 must be in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            problems.push("epsilon must be positive");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            problems.push("val_fraction must be in (0, 1)");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

/// Staircase schedule: `lr0 * decay^floor(step / every)` for the 0-based
/// optimizer step index.
pub fn lr_at_step(cfg: &TrainConfig, step: usize) -> f64 {
    cfg.lr0 * cfg.lr_decay.powi((step / cfg.decay_every_steps) as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    /// Learning rate applied to the last optimizer step of this epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EarlyStopped,
    MaxEpochs,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::EarlyStopped => write!(f, "early_stopped"),
            StopReason::MaxEpochs => write!(f, "max_epochs"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub reason: StopReason,
}

impl TrainHistory {
    /// CSV with header `epoch,loss,acc,val_acc,lr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,acc,val_acc,lr\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.train_loss, e.train_acc, e.val_acc, e.lr
            ));
        }
        out
    }
}

/// Preprocess samples into labeled CNN inputs (`[4, 65, 3]` tensors).
pub fn prepare_features(
    samples: &[TimeSeriesSample],
    settings: &PreprocSettings,
) -> Result<Vec<(Tensor, Label)>> {
    let win = tukey(NFFT, settings.tukey_alpha)?;
    samples
        .iter()
        .map(|s| {
            let features = preprocess_with_window(s, &win, settings)?;
            Ok((to_cnn_input(&features), s.label()))
        })
        .collect()
}

/// Per-layer Adam moment buffers.
struct AdamState {
    m_w: Vec<f64>,
    v_w: Vec<f64>,
    m_b: Vec<f64>,
    v_b: Vec<f64>,
}

struct Adam {
    states: Vec<Option<AdamState>>,
    step: usize,
}

impl Adam {
    fn new(model: &ModelArtifact) -> Self {
        let states = model
            .weights
            .iter()
            .map(|w| {
                w.as_ref().map(|lw| AdamState {
                    m_w: vec![0.0; lw.w.len()],
                    v_w: vec![0.0; lw.w.len()],
                    m_b: vec![0.0; lw.b.len()],
                    v_b: vec![0.0; lw.b.len()],
                })
            })
            .collect();
        Adam { states, step: 0 }
    }

    /// One optimizer step over accumulated gradients. Returns the applied
    /// learning rate.
    fn apply(&mut self, model: &mut ModelArtifact, grads: &Gradients, cfg: &TrainConfig) -> f64 {
        let lr = lr_at_step(cfg, self.step);
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - cfg.beta1.powi(t);
        let bias2 = 1.0 - cfg.beta2.powi(t);

        for (i, state) in self.states.iter_mut().enumerate() {
            let Some(state) = state.as_mut() else { continue };
            let Some((gw, gb)) = grads.per_layer[i].as_ref() else { continue };
            let lw = model.weights[i].as_mut().expect("trainable layer");

            for (j, g) in gw.data().iter().enumerate() {
                state.m_w[j] = cfg.beta1 * state.m_w[j] + (1.0 - cfg.beta1) * g;
                state.v_w[j] = cfg.beta2 * state.v_w[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = state.m_w[j] / bias1;
                let v_hat = state.v_w[j] / bias2;
                lw.w.data_mut()[j] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
            for (j, g) in gb.iter().enumerate() {
                state.m_b[j] = cfg.beta1 * state.m_b[j] + (1.0 - cfg.beta1) * g;
                state.v_b[j] = cfg.beta2 * state.v_b[j] + (1.0 - cfg.beta2) * g * g;
                let m_hat = state.m_b[j] / bias1;
                let v_hat = state.v_b[j] / bias2;
                lw.b[j] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        lr
    }
}

/// Accumulated weight/bias gradients, parallel to the layer list.
struct Gradients {
    per_layer: Vec<Option<(Tensor, Vec<f64>)>>,
}

impl Gradients {
    fn zeros(model: &ModelArtifact) -> Self {
        Gradients {
            per_layer: model
                .weights
                .iter()
                .map(|w| {
                    w.as_ref()
                        .map(|lw| (Tensor::zeros(lw.w.shape()), vec![0.0; lw.b.len()]))
                })
                .collect(),
        }
    }

    fn reset(&mut self) {
        for entry in self.per_layer.iter_mut().flatten() {
            entry.0.data_mut().fill(0.0);
            entry.1.fill(0.0);
        }
    }
}

/// Backpropagate from the loss gradient at the logits (the layer feeding
/// Softmax) down to the first layer, accumulating into `grads`.
fn backprop(
    model: &ModelArtifact,
    x: &Tensor,
    outputs: &[Tensor],
    dlogits: Vec<f64>,
    logits_layer: usize,
    grads: &mut Gradients,
) {
    let mut grad = Tensor::from_vec(&[dlogits.len()], dlogits);
    for i in (0..=logits_layer).rev() {
        let input = if i == 0 { x } else { &outputs[i - 1] };
        let out = &outputs[i];
        grad = match model.layers[i] {
            LayerSpec::Conv2D(spec) => {
                let lw = model.weights[i].as_ref().expect("conv weights");
                let (gw, gb, gx) = layers::conv2d_backward(input, &lw.w, out, &grad, &spec);
                accumulate(grads, i, gw, gb);
                gx
            }
            LayerSpec::Dense(spec) => {
                let lw = model.weights[i].as_ref().expect("dense weights");
                let (gw, gb, gx) = layers::dense_backward(input, &lw.w, out, &grad, &spec);
                accumulate(grads, i, gw, gb);
                gx
            }
            LayerSpec::AvgPool2D { ph, pw } => layers::avg_pool2d_backward(input, &grad, ph, pw),
            LayerSpec::MaxPool2D { ph, pw } => layers::max_pool2d_backward(input, &grad, ph, pw),
            LayerSpec::Flatten => grad.reshape(input.shape()),
            LayerSpec::Softmax => unreachable!("backprop starts below softmax"),
        };
    }
}

fn accumulate(grads: &mut Gradients, layer: usize, gw: Tensor, gb: Vec<f64>) {
    let (acc_w, acc_b) = grads.per_layer[layer].as_mut().expect("trainable layer");
    for (a, g) in acc_w.data_mut().iter_mut().zip(gw.data()) {
        *a += g;
    }
    for (a, g) in acc_b.iter_mut().zip(&gb) {
        *a += g;
    }
}

/// Train the architecture on the split's training samples.
///
/// A validation subset (`val_fraction`, seed-deterministic) drives early
/// stopping: training halts once validation accuracy has not improved for
/// `patience` consecutive epochs, and the weights of the best validation
/// epoch are restored. All randomness (initialization, validation carve-out,
/// epoch shuffling) derives from `cfg.seed`, so identical inputs produce
/// bit-identical models.
pub fn train(
    arch: &[LayerSpec],
    split: &DatasetSplit,
    cfg: &TrainConfig,
    settings: &PreprocSettings,
) -> Result<(ModelArtifact, TrainHistory)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let bytes = param_budget(arch);
    if bytes > PARAM_BUDGET_BYTES {
        return Err(Error::BudgetExceeded {
            bytes,
            budget: PARAM_BUDGET_BYTES,
        });
    }
    if !matches!(arch.last(), Some(LayerSpec::Softmax)) {
        return Err(Error::InvalidConfig(
            "training expects a Softmax output layer".into(),
        ));
    }

    let features = prepare_features(&split.train, settings)?;
    let n_classes = match arch[arch.len() - 2] {
        LayerSpec::Dense(spec) => spec.n_out,
        _ => {
            return Err(Error::InvalidConfig(
                "training expects a Dense layer before Softmax".into(),
            ))
        }
    };

    // Independent deterministic streams per concern.
    let rng_for = |stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        rng
    };

    // Validation carve-out.
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut rng_for(1));
    let mut n_val = ((features.len() as f64 * cfg.val_fraction).round() as usize)
        .min(features.len().saturating_sub(1));
    if features.len() >= 2 && n_val == 0 {
        n_val = 1;
    }
    let (val_idx, train_idx) = order.split_at(n_val);

    let mut model = ModelArtifact::initialized(arch.to_vec(), super::INPUT_SHAPE, cfg.seed)?;
    let mut adam = Adam::new(&model);
    let mut grads = Gradients::zeros(&model);
    let mut shuffle_rng = rng_for(2);

    let logits_layer = arch.len() - 2;
    let mut history = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_weights: Option<Vec<Option<super::LayerWeights>>> = None;
    let mut reason = StopReason::MaxEpochs;
    let mut stopped_epoch = cfg.max_epochs;
    let mut indices: Vec<usize> = train_idx.to_vec();

    for epoch in 1..=cfg.max_epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut last_lr = lr_at_step(cfg, adam.step);

        for batch in indices.chunks(cfg.batch_size) {
            grads.reset();
            let inv = 1.0 / batch.len() as f64;
            for &idx in batch {
                let (x, label) = &features[idx];
                let outputs = model.forward_all(x)?;
                let probs = outputs.last().unwrap().data();
                let target = label.index();
                loss_sum += -(probs[target].max(1e-300)).ln();
                if argmax(probs) == target {
                    correct += 1;
                }
                // Fused softmax + cross-entropy gradient at the logits.
                let mut dlogits: Vec<f64> = probs.iter().map(|&p| p * inv).collect();
                dlogits[target] -= inv;
                backprop(&model, x, &outputs, dlogits, logits_layer, &mut grads);
            }
            last_lr = adam.apply(&mut model, &grads, cfg);
        }

        let val_acc = if val_idx.is_empty() {
            correct as f64 / indices.len() as f64
        } else {
            let mut val_correct = 0usize;
            for &idx in val_idx {
                let (x, label) = &features[idx];
                if model.predict(x)? == label.index() {
                    val_correct += 1;
                }
            }
            val_correct as f64 / val_idx.len() as f64
        };

        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / indices.len() as f64,
            train_acc: correct as f64 / indices.len() as f64,
            val_acc,
            lr: last_lr,
        });

        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best_weights = Some(model.weights.clone());
        } else if epoch - best_epoch >= cfg.patience {
            reason = StopReason::EarlyStopped;
            stopped_epoch = epoch;
            break;
        }
        stopped_epoch = epoch;
    }

    if let Some(weights) = best_weights {
        model.weights = weights;
    }

    model.set_metadata("seed", cfg.seed);
    model.set_metadata("alpha", settings.tukey_alpha);
    model.set_metadata("eps", settings.log_eps);
    model.set_metadata(
        "norm_scope",
        match settings.norm_scope {
            crate::dsp::NormScope::Joint => "joint",
            crate::dsp::NormScope::PerAxis => "per_axis",
        },
    );
    model.set_metadata("batch_size", cfg.batch_size);
    model.set_metadata("max_epochs", cfg.max_epochs);
    model.set_metadata("patience", cfg.patience);
    model.set_metadata("lr0", cfg.lr0);
    model.set_metadata("lr_decay", cfg.lr_decay);
    model.set_metadata("decay_every_steps", cfg.decay_every_steps);
    model.set_metadata("val_fraction", cfg.val_fraction);
    model.set_metadata("param_bytes", model.param_budget());
    model.set_metadata("classes", n_classes);
    model.set_metadata("best_epoch", best_epoch);
    model.set_metadata("stopped_epoch", stopped_epoch);

    Ok((
        model,
        TrainHistory {
            epochs: history,
            stopped_epoch,
            best_epoch,
            reason,
        },
    ))
}

/// Fraction of samples the float model classifies correctly.
pub fn evaluate(model: &ModelArtifact, data: &[(Tensor, Label)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set"));
    }
    let mut correct = 0usize;
    for (x, label) in data {
        if model.predict(x)? == label.index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
