use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Gathers rows of a `[V, D]` table; output is `[ids.len(), D]`.
pub fn embedding_forward<T: Scalar>(ids: &[usize], table: &Tensor<T>) -> Result<Tensor<T>> {
    let (v, d) = match *table.shape() {
        [v, d] => (v, d),
        ref s => return Err(Error::Shape(format!("embedding table must be 2D, got {s:?}"))),
    };
    let mut out = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(Error::OutOfRange { index: id, size: v });
        }
        out.extend_from_slice(&table.data()[id * d..(id + 1) * d]);
    }
    Tensor::from_vec(&[ids.len(), d], out)
}

/// Scatters `grad_out` rows back into the table gradient, summing duplicates.
pub fn embedding_backward<T: Scalar>(ids: &[usize], grad_out: &[T], grad_table: &mut Tensor<T>) {
    let d = grad_table.last_dim();
    debug_assert_eq!(grad_out.len(), ids.len() * d);
    let g = grad_table.data_mut();
    for (row, &id) in grad_out.chunks_exact(d).zip(ids) {
        for (acc, &v) in g[id * d..(id + 1) * d].iter_mut().zip(row) {
            *acc = *acc + v;
        }
    }
}
