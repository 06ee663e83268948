use super::{gemm, Scalar, Tensor};
use crate::{Error, Result};

/// Borrowed LSTM weights. Gates are packed along the last axis in the order
/// input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmParams<'a, T> {
    /// `[D, 4H]`
    pub w_in: &'a Tensor<T>,
    /// `[H, 4H]`
    pub w_rec: &'a Tensor<T>,
    /// `[4H]`
    pub bias: &'a Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct LstmGrads<T> {
    pub w_in: Tensor<T>,
    pub w_rec: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Single-direction LSTM layer with zero initial state that returns the full
/// hidden-state sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lstm {
    pub hidden: usize,
    /// Consume the sequence back to front; outputs stay aligned with inputs.
    pub reverse: bool,
}

#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    input: Tensor<T>,
    batch: usize,
    steps: usize,
    /// activated gates per processing step, `[B, 4H]` each
    gates: Vec<Vec<T>>,
    /// cell states per processing step, `[B, H]` each
    cells: Vec<Vec<T>>,
    /// hidden states per processing step, `[B, H]` each
    hiddens: Vec<Vec<T>>,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl Lstm {
    pub fn new(hidden: usize) -> Self {
        Lstm { hidden, reverse: false }
    }

    pub fn reversed(hidden: usize) -> Self {
        Lstm { hidden, reverse: true }
    }

    /// Parameter count for input width `d`: `4·((d + H)·H + H)`.
    pub fn param_count(&self, d: usize) -> usize {
        4 * ((d + self.hidden) * self.hidden + self.hidden)
    }

    fn time(&self, step: usize, steps: usize) -> usize {
        if self.reverse {
            steps - 1 - step
        } else {
            step
        }
    }

    fn check<T: Scalar>(&self, d: usize, p: &LstmParams<'_, T>) -> Result<()> {
        let h4 = 4 * self.hidden;
        if p.w_in.shape() != [d, h4] || p.w_rec.shape() != [self.hidden, h4] || p.bias.shape() != [h4] {
            return Err(Error::Shape(format!(
                "lstm weights {:?}/{:?}/{:?} vs input width {d}, {} units",
                p.w_in.shape(),
                p.w_rec.shape(),
                p.bias.shape(),
                self.hidden
            )));
        }
        Ok(())
    }

    /// `[B, T, D] -> [B, T, H]` (a 2D `[T, D]` input is a batch of one).
    pub fn forward<T: Scalar>(&self, input: &Tensor<T>, p: LstmParams<'_, T>) -> Result<(Tensor<T>, LstmCache<T>)> {
        let (batch, steps, d, squeeze) = match *input.shape() {
            [t, d] => (1, t, d, true),
            [b, t, d] => (b, t, d, false),
            ref s => return Err(Error::Shape(format!("lstm input must be 2D or 3D, got {s:?}"))),
        };
        self.check(d, &p)?;
        let h = self.hidden;
        let h4 = 4 * h;

        // input projections for every (b, t) at once
        let rows = batch * steps;
        let mut xw = Vec::with_capacity(rows * h4);
        for _ in 0..rows {
            xw.extend_from_slice(p.bias.data());
        }
        gemm(rows, d, h4, input.data(), false, p.w_in.data(), false, &mut xw, true);

        let mut gates = Vec::with_capacity(steps);
        let mut cells: Vec<Vec<T>> = Vec::with_capacity(steps);
        let mut hiddens: Vec<Vec<T>> = Vec::with_capacity(steps);
        let zeros = vec![T::zero(); batch * h];
        let mut out = vec![T::zero(); rows * h];
        for step in 0..steps {
            let t = self.time(step, steps);
            let mut z = Vec::with_capacity(batch * h4);
            for b in 0..batch {
                z.extend_from_slice(&xw[(b * steps + t) * h4..][..h4]);
            }
            let h_prev = hiddens.last().unwrap_or(&zeros);
            gemm(batch, h, h4, h_prev, false, p.w_rec.data(), false, &mut z, true);
            let c_prev = cells.last().unwrap_or(&zeros);
            let mut c = vec![T::zero(); batch * h];
            let mut hs = vec![T::zero(); batch * h];
            for b in 0..batch {
                let zr = &mut z[b * h4..(b + 1) * h4];
                for j in 0..h {
                    let i = sigmoid(zr[j]);
                    let f = sigmoid(zr[h + j]);
                    let g = zr[2 * h + j].tanh();
                    let o = sigmoid(zr[3 * h + j]);
                    zr[j] = i;
                    zr[h + j] = f;
                    zr[2 * h + j] = g;
                    zr[3 * h + j] = o;
                    let cell = f * c_prev[b * h + j] + i * g;
                    c[b * h + j] = cell;
                    hs[b * h + j] = o * cell.tanh();
                }
                out[(b * steps + t) * h..][..h].copy_from_slice(&hs[b * h..(b + 1) * h]);
            }
            gates.push(z);
            cells.push(c);
            hiddens.push(hs);
        }
        let shape: Vec<usize> = if squeeze { vec![steps, h] } else { vec![batch, steps, h] };
        let cache = LstmCache {
            input: input.clone(),
            batch,
            steps,
            gates,
            cells,
            hiddens,
        };
        Ok((Tensor::from_vec(&shape, out)?, cache))
    }

    /// Backpropagation through time. `grad_seq` has the forward output's shape.
    pub fn backward<T: Scalar>(
        &self,
        cache: &LstmCache<T>,
        p: LstmParams<'_, T>,
        grad_seq: &Tensor<T>,
    ) -> (LstmGrads<T>, Tensor<T>) {
        let (batch, steps) = (cache.batch, cache.steps);
        let h = self.hidden;
        let h4 = 4 * h;
        let d = cache.input.last_dim();
        let g_out = grad_seq.data();
        let zeros = vec![T::zero(); batch * h];
        let one = T::one();

        let mut dxw = vec![T::zero(); batch * steps * h4];
        let mut d_rec = Tensor::zeros(&[h, h4]);
        let mut dh_next = vec![T::zero(); batch * h];
        let mut dc_next = vec![T::zero(); batch * h];
        let mut dz = vec![T::zero(); batch * h4];
        for step in (0..steps).rev() {
            let t = self.time(step, steps);
            let gates = &cache.gates[step];
            let c = &cache.cells[step];
            let c_prev = if step > 0 { &cache.cells[step - 1] } else { &zeros };
            let h_prev = if step > 0 { &cache.hiddens[step - 1] } else { &zeros };
            for b in 0..batch {
                let gr = &gates[b * h4..(b + 1) * h4];
                for j in 0..h {
                    let k = b * h + j;
                    let (i, f, g, o) = (gr[j], gr[h + j], gr[2 * h + j], gr[3 * h + j]);
                    let dh = g_out[(b * steps + t) * h + j] + dh_next[k];
                    let tc = c[k].tanh();
                    let d_o = dh * tc;
                    let dc = dh * o * (one - tc * tc) + dc_next[k];
                    let di = dc * g;
                    let dg = dc * i;
                    let df = dc * c_prev[k];
                    dc_next[k] = dc * f;
                    let zr = &mut dz[b * h4..(b + 1) * h4];
                    zr[j] = di * i * (one - i);
                    zr[h + j] = df * f * (one - f);
                    zr[2 * h + j] = dg * (one - g * g);
                    zr[3 * h + j] = d_o * o * (one - o);
                }
            }
            gemm(h, batch, h4, h_prev, true, &dz, false, d_rec.data_mut(), true);
            gemm(batch, h4, h, &dz, false, p.w_rec.data(), true, &mut dh_next, false);
            for b in 0..batch {
                dxw[(b * steps + t) * h4..][..h4].copy_from_slice(&dz[b * h4..(b + 1) * h4]);
            }
        }

        let rows = batch * steps;
        let mut d_in = Tensor::zeros(&[d, h4]);
        gemm(d, rows, h4, cache.input.data(), true, &dxw, false, d_in.data_mut(), false);
        let mut d_bias = Tensor::zeros(&[h4]);
        for row in dxw.chunks_exact(h4) {
            for (acc, &v) in d_bias.data_mut().iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        let mut dx = vec![T::zero(); rows * d];
        gemm(rows, h4, d, &dxw, false, p.w_in.data(), true, &mut dx, false);
        let dx = Tensor::from_vec(cache.input.shape(), dx).expect("input shape");
        (
            LstmGrads {
                w_in: d_in,
                w_rec: d_rec,
                bias: d_bias,
            },
            dx,
        )
    }
}

impl<T: Scalar> LstmCache<T> {
    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Cache of a bidirectional pass: both directions over the same input.
#[derive(Clone, Debug)]
pub struct BiLstmCache<T> {
    pub forward: LstmCache<T>,
    pub backward: LstmCache<T>,
}

/// Runs a forward and a reversed LSTM and concatenates their outputs per
/// timestep: `[B, T, D] -> [B, T, 2H]`.
pub fn bilstm_forward<T: Scalar>(
    hidden: usize,
    input: &Tensor<T>,
    fwd: LstmParams<'_, T>,
    bwd: LstmParams<'_, T>,
) -> Result<(Tensor<T>, BiLstmCache<T>)> {
    let (yf, cf) = Lstm::new(hidden).forward(input, fwd)?;
    let (yb, cb) = Lstm::reversed(hidden).forward(input, bwd)?;
    let rows = yf.len() / hidden;
    let mut out = Vec::with_capacity(rows * 2 * hidden);
    for r in 0..rows {
        out.extend_from_slice(&yf.data()[r * hidden..(r + 1) * hidden]);
        out.extend_from_slice(&yb.data()[r * hidden..(r + 1) * hidden]);
    }
    let mut shape = yf.shape().to_vec();
    *shape.last_mut().expect("non-empty shape") = 2 * hidden;
    Ok((
        Tensor::from_vec(&shape, out)?,
        BiLstmCache {
            forward: cf,
            backward: cb,
        },
    ))
}

pub fn bilstm_backward<T: Scalar>(
    hidden: usize,
    cache: &BiLstmCache<T>,
    fwd: LstmParams<'_, T>,
    bwd: LstmParams<'_, T>,
    grad_seq: &Tensor<T>,
) -> (LstmGrads<T>, LstmGrads<T>, Tensor<T>) {
    let rows = grad_seq.len() / (2 * hidden);
    let mut gf = Vec::with_capacity(rows * hidden);
    let mut gb = Vec::with_capacity(rows * hidden);
    for row in grad_seq.data().chunks_exact(2 * hidden) {
        gf.extend_from_slice(&row[..hidden]);
        gb.extend_from_slice(&row[hidden..]);
    }
    let mut shape = grad_seq.shape().to_vec();
    *shape.last_mut().expect("non-empty shape") = hidden;
    let gf = Tensor::from_vec(&shape, gf).expect("split shape");
    let gb = Tensor::from_vec(&shape, gb).expect("split shape");
    let (grads_f, mut dx) = Lstm::new(hidden).backward(&cache.forward, fwd, &gf);
    let (grads_b, dxb) = Lstm::reversed(hidden).backward(&cache.backward, bwd, &gb);
    dx.add_assign(&dxb);
    (grads_f, grads_b, dx)
}

/// Final hidden state of each direction: for a forward pass the last
/// timestep, for a reversed pass the first. `[B, T, H] -> [B, H]`.
pub fn final_state<T: Scalar>(seq: &Tensor<T>, reverse: bool) -> Tensor<T> {
    let (batch, steps, h) = match *seq.shape() {
        [t, h] => (1, t, h),
        [b, t, h] => (b, t, h),
        _ => panic!("sequence must be 2D or 3D"),
    };
    let t = if reverse { 0 } else { steps - 1 };
    let mut out = Vec::with_capacity(batch * h);
    for b in 0..batch {
        out.extend_from_slice(&seq.data()[(b * steps + t) * h..][..h]);
    }
    Tensor::from_vec(&[batch, h], out).expect("gathered rows")
}

/// Scatters a `[B, H]` gradient back onto the timestep `final_state` read.
pub fn final_state_backward<T: Scalar>(grad: &Tensor<T>, batch: usize, steps: usize, reverse: bool) -> Tensor<T> {
    let h = grad.last_dim();
    let t = if reverse { 0 } else { steps - 1 };
    let mut out = Tensor::zeros(&[batch, steps, h]);
    for b in 0..batch {
        out.data_mut()[(b * steps + t) * h..][..h].copy_from_slice(&grad.data()[b * h..(b + 1) * h]);
    }
    out
}
