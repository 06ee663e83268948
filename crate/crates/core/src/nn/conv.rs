use super::{gemm, Scalar, Tensor};
use crate::{Error, Result};

/// How the time axis is padded before convolving.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// `(K-1)/2` zeros on both ends, stride 1: output length equals input length.
    Same,
    /// Non-overlapping patches (`stride == kernel`), zero-padded at the tail:
    /// output length is `ceil(T / K)`.
    Patch,
}

/// 1D convolution over `[batch, time, channels]` tensors with kernels laid out
/// as `[K, C_in, C_out]`. Implemented as im2col followed by one matrix product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv1d {
    kernel: usize,
    padding: Padding,
}

#[derive(Clone, Debug)]
pub struct ConvCache<T> {
    cols: Vec<T>,
    batch: usize,
    t_in: usize,
    t_out: usize,
    c_in: usize,
    squeeze: bool,
}

impl Conv1d {
    pub fn same(kernel: usize) -> Result<Self> {
        if kernel == 0 || kernel % 2 == 0 {
            return Err(Error::Shape(format!("same-padded conv needs an odd kernel, got {kernel}")));
        }
        Ok(Conv1d {
            kernel,
            padding: Padding::Same,
        })
    }

    pub fn patch(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Shape("patch size must be positive".into()));
        }
        Ok(Conv1d {
            kernel: size,
            padding: Padding::Patch,
        })
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    fn stride(&self) -> usize {
        match self.padding {
            Padding::Same => 1,
            Padding::Patch => self.kernel,
        }
    }

    fn pad_left(&self) -> usize {
        match self.padding {
            Padding::Same => (self.kernel - 1) / 2,
            Padding::Patch => 0,
        }
    }

    pub fn out_len(&self, t: usize) -> usize {
        match self.padding {
            Padding::Same => t,
            Padding::Patch => t.div_ceil(self.kernel),
        }
    }

    fn dims<T: Scalar>(&self, input: &Tensor<T>, kernels: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize, usize, bool)> {
        let (batch, t, c_in, squeeze) = match *input.shape() {
            [t, c] => (1, t, c, true),
            [b, t, c] => (b, t, c, false),
            ref s => return Err(Error::Shape(format!("conv1d input must be 2D or 3D, got {s:?}"))),
        };
        match *kernels.shape() {
            [k, ci, co] if k == self.kernel && ci == c_in => {
                if bias.shape() != [co] {
                    return Err(Error::Shape(format!("conv1d bias {:?} vs {co} filters", bias.shape())));
                }
                Ok((batch, t, c_in, co, squeeze))
            }
            ref s => Err(Error::Shape(format!(
                "conv1d kernels {s:?} incompatible with kernel {} and {c_in} input channels",
                self.kernel
            ))),
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        input: &Tensor<T>,
        kernels: &Tensor<T>,
        bias: &Tensor<T>,
    ) -> Result<(Tensor<T>, ConvCache<T>)> {
        let (batch, t_in, c_in, c_out, squeeze) = self.dims(input, kernels, bias)?;
        let t_out = self.out_len(t_in);
        let width = self.kernel * c_in;
        let stride = self.stride();
        let pad = self.pad_left() as isize;
        let x = input.data();

        let mut cols = vec![T::zero(); batch * t_out * width];
        for b in 0..batch {
            for to in 0..t_out {
                let row = &mut cols[(b * t_out + to) * width..][..width];
                let start = (to * stride) as isize - pad;
                for k in 0..self.kernel {
                    let ti = start + k as isize;
                    if ti < 0 || ti as usize >= t_in {
                        continue;
                    }
                    let src = &x[(b * t_in + ti as usize) * c_in..][..c_in];
                    row[k * c_in..(k + 1) * c_in].copy_from_slice(src);
                }
            }
        }

        let rows = batch * t_out;
        let mut out = vec![T::zero(); rows * c_out];
        for r in 0..rows {
            out[r * c_out..(r + 1) * c_out].copy_from_slice(bias.data());
        }
        gemm(rows, width, c_out, &cols, false, kernels.data(), false, &mut out, true);

        let shape: Vec<usize> = if squeeze { vec![t_out, c_out] } else { vec![batch, t_out, c_out] };
        let cache = ConvCache {
            cols,
            batch,
            t_in,
            t_out,
            c_in,
            squeeze,
        };
        Ok((Tensor::from_vec(&shape, out)?, cache))
    }

    /// Accumulates parameter gradients and returns the input gradient when
    /// `want_input_grad` is set.
    pub fn backward<T: Scalar>(
        &self,
        cache: &ConvCache<T>,
        kernels: &Tensor<T>,
        grad_out: &Tensor<T>,
        grad_kernels: &mut Tensor<T>,
        grad_bias: &mut Tensor<T>,
        want_input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        let c_out = grad_bias.len();
        let rows = cache.batch * cache.t_out;
        let width = self.kernel * cache.c_in;
        if grad_out.len() != rows * c_out {
            return Err(Error::Shape(format!(
                "conv1d grad {:?} vs {rows}x{c_out}",
                grad_out.shape()
            )));
        }
        let g = grad_out.data();
        gemm(width, rows, c_out, &cache.cols, true, g, false, grad_kernels.data_mut(), true);
        let gb = grad_bias.data_mut();
        for r in 0..rows {
            for (acc, &v) in gb.iter_mut().zip(&g[r * c_out..(r + 1) * c_out]) {
                *acc = *acc + v;
            }
        }
        if !want_input_grad {
            return Ok(None);
        }

        let mut gcols = vec![T::zero(); rows * width];
        gemm(rows, c_out, width, g, false, kernels.data(), true, &mut gcols, false);
        let (batch, t_in, c_in) = (cache.batch, cache.t_in, cache.c_in);
        let stride = self.stride();
        let pad = self.pad_left() as isize;
        let mut gx = vec![T::zero(); batch * t_in * c_in];
        for b in 0..batch {
            for to in 0..cache.t_out {
                let row = &gcols[(b * cache.t_out + to) * width..][..width];
                let start = (to * stride) as isize - pad;
                for k in 0..self.kernel {
                    let ti = start + k as isize;
                    if ti < 0 || ti as usize >= t_in {
                        continue;
                    }
                    let dst = &mut gx[(b * t_in + ti as usize) * c_in..][..c_in];
                    for (d, &s) in dst.iter_mut().zip(&row[k * c_in..(k + 1) * c_in]) {
                        *d = *d + s;
                    }
                }
            }
        }
        let shape: Vec<usize> = if cache.squeeze { vec![t_in, c_in] } else { vec![batch, t_in, c_in] };
        Ok(Some(Tensor::from_vec(&shape, gx)?))
    }
}
