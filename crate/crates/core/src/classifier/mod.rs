//! Residual 1D-CNN log classifier: architecture, training and evaluation.

mod arch;
mod metrics;
mod model;
mod train;

pub use arch::{format_conv_layers, parse_conv_layers, ArchConfig, ConvSpec, MAX_SUPPORTED_LEN};
pub use metrics::{ClassMetrics, Metrics};
pub use model::{argmax, ForwardCache, ResCnn, CHECKPOINT_KIND};
pub use train::{evaluate, predict, predict_text, train, EpochStats, History, TrainConfig, TrainOutcome};

use crate::corpus::LogRecord;
use crate::vocab::{CharVocab, Truncation};
use crate::{seed, Error, Result};
use rand::seq::SliceRandom;

/// Per-class loss multipliers `N / (C · n_c)`.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::Empty("class weights need at least one class"));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Config(format!(
            "class {c} has no samples; merge it with another class or resample the corpus"
        )));
    }
    let total: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(counts.iter().map(|&n| total as f64 / (k * n as f64)).collect())
}

/// Counts labels `0..n_classes`.
pub fn label_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}

/// Splits indices `0..labels.len()` into `(rest, held_out)` so that each
/// class contributes `round(frac · n_c)` items to the held-out part, keeping
/// at least one item of every class on the other side.
pub fn stratified_split(labels: &[usize], frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut rng = seed::rng(seed, "stratified-split", 0);
    let (mut rest, mut held) = (Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let mut k = (frac * idx.len() as f64).round() as usize;
        if idx.len() > 1 {
            k = k.min(idx.len() - 1);
        } else {
            k = 0;
        }
        held.extend_from_slice(&idx[..k]);
        rest.extend_from_slice(&idx[k..]);
    }
    rest.sort_unstable();
    held.sort_unstable();
    (rest, held)
}

/// Labelled samples encoded to a fixed length.
#[derive(Clone, Debug)]
pub struct EncodedSet {
    ids: Vec<u32>,
    pub labels: Vec<usize>,
    pub max_len: usize,
}

impl EncodedSet {
    /// Fails on records without a label.
    pub fn encode(records: &[LogRecord], vocab: &CharVocab, max_len: usize, truncation: Truncation) -> Result<Self> {
        let mut ids = Vec::with_capacity(records.len() * max_len);
        let mut labels = Vec::with_capacity(records.len());
        for r in records {
            let label = r
                .label
                .ok_or_else(|| Error::InvalidLabel(format!("record {} has no label", r.id)))?;
            labels.push(label.index());
            ids.extend(vocab.encode_with(&r.raw_text, max_len, truncation).into_iter().map(|i| i as u32));
        }
        Ok(EncodedSet { ids, labels, max_len })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[u32] {
        &self.ids[i * self.max_len..(i + 1) * self.max_len]
    }

    /// Ids of the given samples laid out back to back.
    pub fn gather(&self, indices: &[usize]) -> Vec<usize> {
        let mut out = Vec::with_capacity(indices.len() * self.max_len);
        for &i in indices {
            out.extend(self.sample(i).iter().map(|&v| v as usize));
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut ids = Vec::with_capacity(indices.len() * self.max_len);
        for &i in indices {
            ids.extend_from_slice(self.sample(i));
        }
        EncodedSet {
            ids,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            max_len: self.max_len,
        }
    }
}
