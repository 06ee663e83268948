use super::{gemm, Scalar, Tensor};
use crate::{Error, Result};

/// Affine map over the last axis: `[..., D_in] -> [..., D_out]`.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let d_in = input.last_dim();
    let d_out = match *weight.shape() {
        [i, o] if i == d_in => o,
        ref s => return Err(Error::Shape(format!("dense weight {s:?} vs input width {d_in}"))),
    };
    if bias.shape() != [d_out] {
        return Err(Error::Shape(format!("dense bias {:?} vs {d_out} units", bias.shape())));
    }
    let rows = if d_in == 0 { 0 } else { input.len() / d_in };
    let mut out = Vec::with_capacity(rows * d_out);
    for _ in 0..rows {
        out.extend_from_slice(bias.data());
    }
    gemm(rows, d_in, d_out, input.data(), false, weight.data(), false, &mut out, true);
    let mut shape = input.shape().to_vec();
    *shape.last_mut().expect("input has at least one axis") = d_out;
    Tensor::from_vec(&shape, out)
}

/// Accumulates weight and bias gradients; returns the input gradient if asked.
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    grad_weight: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
    want_input_grad: bool,
) -> Option<Tensor<T>> {
    let d_in = input.last_dim();
    let d_out = grad_out.last_dim();
    let rows = if d_in == 0 { 0 } else { input.len() / d_in };
    let g = grad_out.data();
    gemm(d_in, rows, d_out, input.data(), true, g, false, grad_weight.data_mut(), true);
    let gb = grad_bias.data_mut();
    for row in g.chunks_exact(d_out) {
        for (acc, &v) in gb.iter_mut().zip(row) {
            *acc = *acc + v;
        }
    }
    if !want_input_grad {
        return None;
    }
    let mut gx = vec![T::zero(); rows * d_in];
    gemm(rows, d_out, d_in, g, false, weight.data(), true, &mut gx, false);
    Some(Tensor::from_vec(input.shape(), gx).expect("same element count as input"))
}
