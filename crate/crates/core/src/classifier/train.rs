use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{argmax, class_weights, label_counts, EncodedSet, Metrics, ResCnn};
use crate::checkpoint::ModelCheckpoint;
use crate::corpus::LogRecord;
use crate::nn::{softmax_cross_entropy, softmax_rows, Adam, AdamState, Tensor};
use crate::{seed, Error, Result};

/// Ids per forward pass; larger batches are split and their gradients
/// accumulated.
const IDS_PER_PASS: usize = 64_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-4,
            max_epochs: 200,
            patience: 30,
            batch_size: 32,
            l2: 1e-4,
            seed: 0,
            val_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return err("train.patience must be smaller than train.max_epochs");
        }
        if self.batch_size == 0 {
            return err("train.batch_size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.l2 < 0.0 {
            return err("train.lr must be positive and train.l2 non-negative");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return err("train.val_fraction must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub train_f1_micro: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_f1_micro: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose weights were kept (lowest validation loss).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

pub struct TrainOutcome {
    pub checkpoint: ModelCheckpoint,
    pub history: History,
}

fn micro_batch(max_len: usize) -> usize {
    (IDS_PER_PASS / max_len).max(1)
}

/// Weighted loss and argmax predictions over a whole set.
fn score(model: &ResCnn<f32>, set: &EncodedSet, weights: &[f32]) -> Result<(f64, Vec<usize>)> {
    let all: Vec<usize> = (0..set.len()).collect();
    let mut loss = 0.0;
    let mut preds = Vec::with_capacity(set.len());
    for chunk in all.chunks(micro_batch(set.max_len)) {
        let (logits, _) = model.forward(&set.gather(chunk), chunk.len())?;
        let targets: Vec<usize> = chunk.iter().map(|&i| set.labels[i]).collect();
        let (l, _) = softmax_cross_entropy(&logits, &targets, weights)?;
        loss += l * chunk.len() as f64;
        preds.extend(logits.data().chunks_exact(logits.last_dim()).map(|row| {
            let row: Vec<f64> = row.iter().map(|&v| v as f64).collect();
            argmax(&row)
        }));
    }
    Ok((loss / set.len() as f64, preds))
}

fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}

/// Trains with class-weighted cross-entropy, Adam and L2 on dense weights,
/// and early stopping on validation loss. The model ends up holding the
/// weights of the best validation epoch.
pub fn train(model: &mut ResCnn<f32>, train_set: &EncodedSet, val_set: &EncodedSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training split is empty"));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation split is empty"));
    }
    for set in [train_set, val_set] {
        if set.max_len != model.arch.max_len {
            return Err(Error::Shape(format!(
                "set encoded to {} chars but model expects {}",
                set.max_len, model.arch.max_len
            )));
        }
    }
    let n_classes = model.arch.n_classes;
    if let Some(&bad) = train_set.labels.iter().chain(&val_set.labels).find(|&&l| l >= n_classes) {
        return Err(Error::OutOfRange { index: bad, size: n_classes });
    }
    let weights: Vec<f32> = class_weights(&label_counts(&train_set.labels, n_classes))?
        .into_iter()
        .map(|w| w as f32)
        .collect();

    let adam = Adam {
        lr: cfg.lr,
        l2: cfg.l2,
        ..Adam::default()
    };
    let mut state = AdamState::new(&model.params);
    let micro = micro_batch(train_set.max_len);
    let mut history = History::default();
    let mut best: Option<(f64, Vec<Tensor<f32>>)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut seed::rng(cfg.seed, "classifier-shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        let mut train_preds = Vec::with_capacity(order.len());
        let mut train_truth = Vec::with_capacity(order.len());
        for batch in order.chunks(cfg.batch_size) {
            model.params.zero_grad();
            for part in batch.chunks(micro) {
                let targets: Vec<usize> = part.iter().map(|&i| train_set.labels[i]).collect();
                let (logits, cache) = model.forward(&train_set.gather(part), part.len())?;
                let (loss, mut grad) = softmax_cross_entropy(&logits, &targets, &weights)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!("classifier loss became {loss} in epoch {}", epoch + 1)));
                }
                loss_sum += loss * part.len() as f64;
                let scale = part.len() as f32 / batch.len() as f32;
                grad.data_mut().iter_mut().for_each(|g| *g *= scale);
                model.backward(&cache, &grad)?;
                for row in logits.data().chunks_exact(n_classes) {
                    let row: Vec<f64> = row.iter().map(|&v| v as f64).collect();
                    train_preds.push(argmax(&row));
                }
                train_truth.extend(targets);
            }
            adam.step(&mut model.params, &mut state);
        }

        let (val_loss, val_preds) = score(model, val_set, &weights)?;
        if !val_loss.is_finite() {
            return Err(Error::Diverged(format!("validation loss became {val_loss} in epoch {}", epoch + 1)));
        }
        let train_acc = accuracy(&train_truth, &train_preds);
        let val_acc = accuracy(&val_set.labels, &val_preds);
        let stats = EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / order.len() as f64,
            train_accuracy: train_acc,
            train_f1_micro: Metrics::from_predictions(&train_truth, &train_preds, n_classes)?.f1_micro,
            val_loss,
            val_accuracy: val_acc,
            val_f1_micro: Metrics::from_predictions(&val_set.labels, &val_preds, n_classes)?.f1_micro,
        };
        log::info!(
            "epoch {}: train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4}",
            stats.epoch,
            stats.train_loss,
            stats.train_accuracy,
            stats.val_loss,
            stats.val_accuracy
        );
        history.epochs.push(stats);

        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.params.values()));
            history.best_epoch = epoch + 1;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    if let Some((_, values)) = best {
        model.params.restore(values);
    }
    let mut checkpoint = model.to_checkpoint();
    checkpoint.metrics = serde_json::json!({
        "best_epoch": history.best_epoch,
        "epochs_run": history.epochs.len(),
        "best_val": history.epochs.get(history.best_epoch.saturating_sub(1)),
    });
    Ok(TrainOutcome { checkpoint, history })
}

/// Predicted class and class probabilities for raw text.
pub fn predict_text(model: &ResCnn<f32>, text: &str) -> Result<(usize, Vec<f64>)> {
    let probs = softmax_rows(&model.forward(&model.encode(text), 1)?.0).to_f64_vec();
    Ok((argmax(&probs), probs))
}

pub fn predict(model: &ResCnn<f32>, record: &LogRecord) -> Result<(usize, Vec<f64>)> {
    predict_text(model, &record.raw_text)
}

pub fn evaluate(model: &ResCnn<f32>, test_set: &EncodedSet) -> Result<Metrics> {
    if test_set.is_empty() {
        return Err(Error::Empty("test set is empty"));
    }
    let weights = vec![1.0; model.arch.n_classes];
    let (_, preds) = score(model, test_set, &weights)?;
    Metrics::from_predictions(&test_set.labels, &preds, model.arch.n_classes)
}
