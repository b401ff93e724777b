//! Gradient-based training: Adam updates, per-epoch validation, and early
//! stopping once the best validation loss stops improving meaningfully.

use super::{backward, loss, LstmError, LstmGradients, LstmModel};
use crate::dataset::SequenceSample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Knobs for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without meaningful improvement before stopping.
    pub patience: usize,
    /// Relative improvement below this counts as "no change".
    pub improvement_epsilon: f64,
    /// `None` trains full-batch; `Some(b)` shuffles and updates per chunk.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 1000,
            patience: 100,
            improvement_epsilon: 1e-6,
            batch_size: None,
        }
    }
}

/// Per-epoch loss curves plus where training stopped and where it peaked.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Index of the last recorded epoch (0-based).
    pub stopped_epoch: usize,
    /// Epoch whose validation loss was lowest; the returned model carries
    /// this epoch's parameters.
    pub best_epoch: usize,
}

/// What the early-stop bookkeeping says after observing an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Tracks the monitored loss across epochs and decides when to stop.
///
/// Two reference points are kept separately: the strict minimum (which the
/// returned model snapshots) and a staleness baseline that only moves when
/// the loss beats it by at least `epsilon` relative. Once `patience` epochs
/// pass without moving the baseline, training stops. Because the strict
/// minimum can only trail the baseline by staleness epochs, the guarantee
/// `stopped_epoch - best_epoch <= patience` always holds when a stop fires.
#[derive(Debug, Clone)]
pub struct EarlyStopTracker {
    patience: usize,
    epsilon: f64,
    best_loss: f64,
    best_epoch: usize,
    baseline: f64,
    stale_epochs: usize,
    epochs_seen: usize,
}

impl EarlyStopTracker {
    pub fn new(patience: usize, epsilon: f64) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        EarlyStopTracker {
            patience,
            epsilon,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            baseline: f64::INFINITY,
            stale_epochs: 0,
            epochs_seen: 0,
        }
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    /// Feeds one epoch's monitored loss; returns whether this epoch achieved
    /// a new strict minimum and whether to stop.
    pub fn observe(&mut self, value: f64) -> (bool, StopDecision) {
        let epoch = self.epochs_seen;
        self.epochs_seen += 1;

        let new_best = value < self.best_loss;
        if new_best {
            self.best_loss = value;
            self.best_epoch = epoch;
        }

        let significant = if self.baseline.is_infinite() {
            value.is_finite()
        } else {
            let rel = (self.baseline - value) / self.baseline.abs().max(1e-12);
            rel >= self.epsilon && value < self.baseline
        };
        if significant {
            self.baseline = value;
            self.stale_epochs = 0;
        } else {
            self.stale_epochs += 1;
        }

        let decision = if self.stale_epochs >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        };
        (new_best, decision)
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    lr: f64,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    fn new(num_params: usize, lr: f64) -> Self {
        AdamState { m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0, lr }
    }

    fn update(&mut self, model: &mut LstmModel, grads: &LstmGradients) {
        self.step += 1;
        let flat = grads.flatten();
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step as i32);
        let mut idx = 0;
        model.for_each_param_mut(&mut |p| {
            let g = flat[idx];
            self.m[idx] = ADAM_BETA1 * self.m[idx] + (1.0 - ADAM_BETA1) * g;
            self.v[idx] = ADAM_BETA2 * self.v[idx] + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = self.m[idx] / bc1;
            let v_hat = self.v[idx] / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            idx += 1;
        });
    }
}

fn mean_loss(model: &LstmModel, samples: &[SequenceSample]) -> Result<f64, LstmError> {
    let mut acc = 0.0;
    for s in samples {
        let (pred, _) = model.forward(&s.inputs)?;
        acc += loss(&pred, &s.target);
    }
    Ok(acc / samples.len() as f64)
}

fn batch_gradient(model: &LstmModel, samples: &[SequenceSample], indices: &[usize]) -> Result<LstmGradients, LstmError> {
    let mut acc = LstmGradients::zeros_like(model);
    for &i in indices {
        let s = &samples[i];
        let (_, cache) = model.forward(&s.inputs)?;
        let g = backward(model, &cache, &s.target)?;
        acc.add(&g);
    }
    acc.scale(1.0 / indices.len() as f64);
    Ok(acc)
}

/// Trains with Adam until `max_epochs` or until the validation loss goes
/// stale for `patience` epochs. Returns the parameters of the best
/// validation epoch plus the full loss history.
///
/// With an empty validation set the training loss is monitored instead.
/// Everything is deterministic given (model, data, config): mini-batch
/// shuffling draws from a stream seeded by `model.rng_seed`.
pub fn train(
    mut model: LstmModel,
    train_samples: &[SequenceSample],
    val_samples: &[SequenceSample],
    config: &TrainConfig,
) -> Result<(LstmModel, TrainingHistory), LstmError> {
    if train_samples.is_empty() {
        return Err(LstmError::EmptyTrainingSet);
    }
    let mut adam = AdamState::new(model.count_params(), config.learning_rate);
    let mut tracker = EarlyStopTracker::new(config.patience, config.improvement_epsilon);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(model.rng_seed ^ 0x5eed_ba7c);
    let mut history = TrainingHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
    };
    let mut best_params = model.flatten_params();
    let mut indices: Vec<usize> = (0..train_samples.len()).collect();

    for epoch in 0..config.max_epochs {
        match config.batch_size {
            None => {
                let grads = batch_gradient(&model, train_samples, &indices)?;
                adam.update(&mut model, &grads);
            }
            Some(b) => {
                indices.shuffle(&mut shuffle_rng);
                for chunk in indices.chunks(b.max(1)) {
                    let grads = batch_gradient(&model, train_samples, chunk)?;
                    adam.update(&mut model, &grads);
                }
            }
        }

        let train_loss = mean_loss(&model, train_samples)?;
        let val_loss = if val_samples.is_empty() {
            train_loss
        } else {
            mean_loss(&model, val_samples)?
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(LstmError::NonFiniteLoss { epoch });
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.stopped_epoch = epoch;

        let (new_best, decision) = tracker.observe(val_loss);
        if new_best {
            best_params = model.flatten_params();
            history.best_epoch = epoch;
        }
        if decision == StopDecision::Stop {
            break;
        }
    }

    model.load_flat_params(&best_params);
    Ok((model, history))
}
