use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Row-wise softmax of a `[B, C]` tensor, with max subtraction.
pub fn softmax_rows<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let c = logits.last_dim();
    let mut out = logits.clone();
    if c == 0 {
        return out;
    }
    for row in out.data_mut().chunks_exact_mut(c) {
        let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        let mut sum = T::zero();
        for x in row.iter_mut() {
            *x = (*x - max).exp();
            sum = sum + *x;
        }
        for x in row.iter_mut() {
            *x = *x / sum;
        }
    }
    out
}

/// Class-weighted categorical cross-entropy averaged over the batch:
/// `loss = (1/B) Σ_b w[y_b] · -log softmax(logits_b)[y_b]`.
///
/// Returns the loss and its gradient with respect to the logits.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[usize],
    class_weights: &[T],
) -> Result<(f64, Tensor<T>)> {
    let c = logits.last_dim();
    let b = if c == 0 { 0 } else { logits.len() / c };
    if b != targets.len() {
        return Err(Error::Shape(format!("{} targets for {b} logit rows", targets.len())));
    }
    if class_weights.len() != c {
        return Err(Error::Shape(format!("{} class weights for {c} classes", class_weights.len())));
    }
    if b == 0 {
        return Err(Error::Empty("cross-entropy over an empty batch"));
    }
    let mut grad = softmax_rows(logits);
    let scale = T::one() / T::from_usize(b).expect("batch size fits");
    let mut loss = 0.0f64;
    for (row_idx, (row, &y)) in grad.data_mut().chunks_exact_mut(c).zip(targets).enumerate() {
        if y >= c {
            return Err(Error::OutOfRange { index: y, size: c });
        }
        // log-softmax computed from the raw logits for accuracy
        let raw = &logits.data()[row_idx * c..(row_idx + 1) * c];
        let max = raw.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        let lse = raw.iter().fold(T::zero(), |s, &x| s + (x - max).exp()).ln() + max;
        let w = class_weights[y];
        loss += (w * (lse - raw[y])).to_f64_lossy();
        row[y] = row[y] - T::one();
        for g in row.iter_mut() {
            *g = *g * w * scale;
        }
    }
    Ok((loss / b as f64, grad))
}
