use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, class_weights, label_counts, Metrics};
use crate::nn::{dense_backward, dense_forward, glorot, softmax_cross_entropy, softmax_rows, Adam, AdamState, Param, ParamSet, Tensor};
use crate::{seed, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            lr: 1e-2,
            epochs: 300,
            l2: 0.0,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression over document embeddings, trained full
/// batch with class-weighted cross-entropy.
#[derive(Clone, Debug)]
pub struct EmbedClassifier {
    pub dim: usize,
    pub n_classes: usize,
    params: ParamSet<f64>,
}

impl EmbedClassifier {
    pub fn train(features: &[Vec<f64>], labels: &[usize], n_classes: usize, cfg: &EmbedTrainConfig) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::Empty("embedding classifier needs one label per non-empty feature row"));
        }
        let dim = features[0].len();
        let x = to_matrix(features, dim)?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::OutOfRange { index: bad, size: n_classes });
        }
        let weights = class_weights(&label_counts(labels, n_classes))?;
        let mut rng = seed::rng(cfg.seed, "embed-head-init", 0);
        let mut params = ParamSet::new();
        let w = params.push(Param::new("head.weight", glorot(&mut rng, &[dim, n_classes], dim, n_classes), true));
        let b = params.push(Param::new("head.bias", Tensor::zeros(&[n_classes]), false));
        let adam = Adam {
            lr: cfg.lr,
            l2: cfg.l2,
            ..Adam::default()
        };
        let mut state = AdamState::new(&params);
        for epoch in 0..cfg.epochs {
            params.zero_grad();
            let logits = dense_forward(&x, params.value(w), params.value(b))?;
            let (loss, grad) = softmax_cross_entropy(&logits, labels, &weights)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("embedding classifier loss became {loss} in epoch {}", epoch + 1)));
            }
            let (pw, pb) = params.pair_mut(w, b);
            dense_backward(&x, &pw.value, &grad, &mut pw.grad, &mut pb.grad, false);
            adam.step(&mut params, &mut state);
        }
        Ok(EmbedClassifier { dim, n_classes, params })
    }

    /// Class probabilities per row.
    pub fn predict_proba(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let x = to_matrix(features, self.dim)?;
        let logits = dense_forward(&x, self.params.value(0), self.params.value(1))?;
        Ok(softmax_rows(&logits).data().chunks_exact(self.n_classes).map(<[f64]>::to_vec).collect())
    }

    /// Predicted class (lowest index on ties) and probabilities.
    pub fn classify(&self, embedding: &[f64]) -> Result<(usize, Vec<f64>)> {
        let probs = self.predict_proba(&[embedding.to_vec()])?.remove(0);
        Ok((argmax(&probs), probs))
    }

    pub fn evaluate(&self, features: &[Vec<f64>], labels: &[usize]) -> Result<Metrics> {
        let preds: Vec<usize> = self.predict_proba(features)?.iter().map(|p| argmax(p)).collect();
        Metrics::from_predictions(labels, &preds, self.n_classes)
    }
}

fn to_matrix(rows: &[Vec<f64>], dim: usize) -> Result<Tensor<f64>> {
    if rows.is_empty() {
        return Err(Error::Empty("no feature rows"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Shape(format!("feature row of dimension {} where {dim} was expected", r.len())));
    }
    Tensor::from_vec(&[rows.len(), dim], rows.concat())
}
