use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct MaxPoolCache {
    argmax: Vec<usize>,
    batch: usize,
    t: usize,
    channels: usize,
    squeeze: bool,
}

/// Per-channel maximum over time: `[B, T, C] -> [B, C]` (or `[T, C] -> [C]`).
/// Ties resolve to the first time index.
pub fn global_max_pool_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, MaxPoolCache)> {
    let (batch, t, c, squeeze) = match *input.shape() {
        [t, c] => (1, t, c, true),
        [b, t, c] => (b, t, c, false),
        ref s => return Err(Error::Shape(format!("max pool input must be 2D or 3D, got {s:?}"))),
    };
    if t == 0 {
        return Err(Error::Empty("global max pool over zero timesteps"));
    }
    let x = input.data();
    let mut out = vec![T::zero(); batch * c];
    let mut argmax = vec![0usize; batch * c];
    for b in 0..batch {
        let base = b * t * c;
        let best = &mut out[b * c..(b + 1) * c];
        let arg = &mut argmax[b * c..(b + 1) * c];
        best.copy_from_slice(&x[base..base + c]);
        for step in 1..t {
            let row = &x[base + step * c..base + (step + 1) * c];
            for ch in 0..c {
                if row[ch] > best[ch] {
                    best[ch] = row[ch];
                    arg[ch] = step;
                }
            }
        }
    }
    let shape: Vec<usize> = if squeeze { vec![c] } else { vec![batch, c] };
    let cache = MaxPoolCache {
        argmax,
        batch,
        t,
        channels: c,
        squeeze,
    };
    Ok((Tensor::from_vec(&shape, out)?, cache))
}

pub fn global_max_pool_backward<T: Scalar>(cache: &MaxPoolCache, grad_out: &Tensor<T>) -> Tensor<T> {
    let (batch, t, c) = (cache.batch, cache.t, cache.channels);
    let mut gx = vec![T::zero(); batch * t * c];
    let g = grad_out.data();
    for b in 0..batch {
        for ch in 0..c {
            let step = cache.argmax[b * c + ch];
            gx[(b * t + step) * c + ch] = g[b * c + ch];
        }
    }
    let shape: Vec<usize> = if cache.squeeze { vec![t, c] } else { vec![batch, t, c] };
    Tensor::from_vec(&shape, gx).expect("cache describes the input shape")
}

#[derive(Clone, Debug)]
pub struct LocalPoolCache {
    argmax: Vec<usize>,
    batch: usize,
    t_in: usize,
    channels: usize,
}

/// Non-overlapping max pooling along time: `[B, T, C] -> [B, ceil(T/size), C]`.
/// The last window may be shorter. Ties resolve to the first time index.
pub fn max_pool_forward<T: Scalar>(input: &Tensor<T>, size: usize) -> Result<(Tensor<T>, LocalPoolCache)> {
    let [batch, t, c] = *input.shape() else {
        return Err(Error::Shape(format!("local max pool input must be 3D, got {:?}", input.shape())));
    };
    if size == 0 || t == 0 {
        return Err(Error::Shape(format!("local max pool of size {size} over {t} timesteps")));
    }
    let t_out = t.div_ceil(size);
    let x = input.data();
    let mut out = vec![T::zero(); batch * t_out * c];
    let mut argmax = vec![0usize; batch * t_out * c];
    for b in 0..batch {
        for w in 0..t_out {
            let o = (b * t_out + w) * c;
            let first = w * size;
            out[o..o + c].copy_from_slice(&x[(b * t + first) * c..(b * t + first + 1) * c]);
            argmax[o..o + c].fill(first);
            for step in first + 1..(first + size).min(t) {
                let row = &x[(b * t + step) * c..(b * t + step + 1) * c];
                for ch in 0..c {
                    if row[ch] > out[o + ch] {
                        out[o + ch] = row[ch];
                        argmax[o + ch] = step;
                    }
                }
            }
        }
    }
    let cache = LocalPoolCache {
        argmax,
        batch,
        t_in: t,
        channels: c,
    };
    Ok((Tensor::from_vec(&[batch, t_out, c], out)?, cache))
}

pub fn max_pool_backward<T: Scalar>(cache: &LocalPoolCache, grad_out: &Tensor<T>) -> Tensor<T> {
    let (batch, t, c) = (cache.batch, cache.t_in, cache.channels);
    let t_out = cache.argmax.len() / (batch * c);
    let mut gx = vec![T::zero(); batch * t * c];
    let g = grad_out.data();
    for b in 0..batch {
        for w in 0..t_out {
            let o = (b * t_out + w) * c;
            for ch in 0..c {
                gx[(b * t + cache.argmax[o + ch]) * c + ch] = g[o + ch];
            }
        }
    }
    Tensor::from_vec(&[batch, t, c], gx).expect("cache describes the input shape")
}
