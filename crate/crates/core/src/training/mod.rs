//! Mini-batch training with validation-based model selection.

mod optim;

pub use optim::{clip_global_norm, lr_at, Adam, AdamConfig, Schedule};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::Dataset;
use crate::error::{Error, Result};
use crate::harness::evaluate;
use crate::model::{adjacency_as, lit, save_checkpoint, Model, Scalar};
use crate::petrinet::PetriNet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub schedule: Schedule,
    pub adam: AdamConfig,
    /// Sequences (trace windows) per parameter update.
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Global gradient-norm limit; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Fraction of training traces held out for model selection.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            adam: AdamConfig::default(),
            batch_size: 32,
            max_epochs: 100,
            clip_norm: Some(5.0),
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        let ok = self.batch_size > 0
            && s.lr_max > 0.0
            && s.lr_min >= 0.0
            && s.lr_min <= s.lr_max
            && s.period > 0
            && s.period_mult > 0
            && self.clip_norm.is_none_or(|c| c > 0.0)
            && self.val_fraction > 0.0
            && self.val_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid training configuration: {self:?}")))
        }
    }
}

/// Seeded split of `0..n` trace indices into training and validation sets.
pub fn split_train_val(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 5 {
        return Err(Error::TooFewTraces { needed: 5, got: n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let train = idx.split_off(val);
    Ok((train, idx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean cross-entropy over the scored training prefixes.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// First epoch with the highest validation accuracy.
    pub best_epoch: Option<usize>,
    pub best_val_accuracy: Option<f64>,
    pub checkpoint: Option<PathBuf>,
}

/// Trains `model` on `train` and returns the parameters from the epoch with
/// the best accuracy on `val`. With zero epochs the initial parameters are
/// returned.
pub fn train<T: Scalar>(
    model: Model<T>,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<(Model<T>, TrainReport)> {
    config.validate()?;
    if train.encoder.vocab_hash() != val.encoder.vocab_hash() {
        return Err(Error::VocabMismatch("training and validation sets use different encoders".into()));
    }
    let a_hat = adjacency_as::<T>(&train.normalized);
    let windows = train.windows();
    let sequences: Vec<_> = windows.iter().map(|w| train.sequence(w)).collect();
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model, config.adam);
    let mut model = model;
    let mut best = model.clone();
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: None,
        best_val_accuracy: None,
        checkpoint: None,
    };

    for epoch in 0..config.max_epochs {
        let lr = lr_at(&config.schedule, epoch);
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut total_count = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut grad = model.zeros_like();
            let mut batch_loss = T::zero();
            let mut batch_count = 0;
            for &i in chunk {
                let (l, c) = model.sequence_loss(&a_hat, &sequences[i], Some(&mut grad))?;
                batch_loss += l;
                batch_count += c;
            }
            if batch_count == 0 {
                continue;
            }
            let scale: T = lit(1.0 / batch_count as f64);
            for t in grad.tensors_mut() {
                t.mapv_inplace(|v| v * scale);
            }
            if let Some(max) = config.clip_norm {
                clip_global_norm(&mut grad, max);
            }
            adam.step(&mut model, &grad, lr)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}: {e}")))?;
            total_loss += batch_loss.to_f64().unwrap_or(f64::NAN);
            total_count += batch_count;
        }
        let train_loss = if total_count == 0 { 0.0 } else { total_loss / total_count as f64 };
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let val_accuracy = evaluate(&model, val)?.accuracy;
        log::info!("epoch {epoch}: lr {lr:.2e}, train loss {train_loss:.4}, val accuracy {val_accuracy:.4}");
        if report.best_val_accuracy.is_none_or(|b| val_accuracy > b) {
            report.best_epoch = Some(epoch);
            report.best_val_accuracy = Some(val_accuracy);
            best = model.clone();
        }
        report.epochs.push(EpochStats {
            epoch,
            learning_rate: lr,
            train_loss,
            val_accuracy,
        });
    }
    Ok((best, report))
}

/// [`train`] in 32-bit, then writes the selected parameters as a checkpoint
/// in `dir`.
pub fn train_to_checkpoint(
    model: Model<f32>,
    train_set: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
    net: &PetriNet,
    dir: &Path,
) -> Result<(Model<f32>, TrainReport)> {
    let (best, mut report) = train(model, train_set, val, config)?;
    save_checkpoint(dir, &best, &train_set.encoder, net)?;
    report.checkpoint = Some(dir.to_path_buf());
    Ok((best, report))
}
