//! Central finite differences against the analytic backward passes.
//!
//! Each `check_*` builds one random instance, projects the layer output onto
//! a random direction to get a scalar loss, and returns the worst relative
//! error over every gradient the layer produces.

use logtriage::nn::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, rand_vec(rng, n)).unwrap()
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

pub fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + EPS;
            let up = f(&probe);
            probe[i] = orig - EPS;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * EPS)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape, data.to_vec()).unwrap()
}

pub fn check_embedding(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (v, d, n) = (r.random_range(2..6), r.random_range(1..5), r.random_range(1..8));
    let ids: Vec<usize> = (0..n).map(|_| r.random_range(0..v)).collect();
    let table = rand_tensor(&mut r, &[v, d]);
    let proj = rand_vec(&mut r, n * d);
    let mut g = Tensor::zeros(&[v, d]);
    embedding_backward(&ids, &proj, &mut g);
    let num = numeric_grad(table.data(), |w| dot(embedding_forward(&ids, &t(&[v, d], w)).unwrap().data(), &proj));
    rel_err(g.data(), &num)
}

pub fn check_conv(seed: u64, patch: bool) -> f64 {
    let mut r = rng(seed);
    let b = r.random_range(1..3);
    let steps = r.random_range(1..9);
    let (ci, co) = (r.random_range(1..4), r.random_range(1..4));
    let conv = if patch {
        Conv1d::patch(r.random_range(1..4)).unwrap()
    } else {
        Conv1d::same([1, 3, 5][r.random_range(0..3)]).unwrap()
    };
    let k = conv.kernel();
    let x = rand_tensor(&mut r, &[b, steps, ci]);
    let w = rand_tensor(&mut r, &[k, ci, co]);
    let bias = rand_tensor(&mut r, &[co]);
    let (y, cache) = conv.forward(&x, &w, &bias).unwrap();
    let proj = rand_tensor(&mut r, y.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(bias.shape());
    let gx = conv.backward(&cache, &w, &proj, &mut gw, &mut gb, true).unwrap().unwrap();
    let f = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| dot(conv.forward(x, w, b).unwrap().0.data(), proj.data());
    let nx = numeric_grad(x.data(), |v| f(&t(x.shape(), v), &w, &bias));
    let nw = numeric_grad(w.data(), |v| f(&x, &t(w.shape(), v), &bias));
    let nb = numeric_grad(bias.data(), |v| f(&x, &w, &t(bias.shape(), v)));
    rel_err(gx.data(), &nx).max(rel_err(gw.data(), &nw)).max(rel_err(gb.data(), &nb))
}

pub fn check_dense(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (n, di, dout) = (r.random_range(1..5), r.random_range(1..5), r.random_range(1..5));
    let x = rand_tensor(&mut r, &[n, di]);
    let w = rand_tensor(&mut r, &[di, dout]);
    let b = rand_tensor(&mut r, &[dout]);
    let proj = rand_tensor(&mut r, &[n, dout]);
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(b.shape());
    let gx = dense_backward(&x, &w, &proj, &mut gw, &mut gb, true).unwrap();
    let f = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| dot(dense_forward(x, w, b).unwrap().data(), proj.data());
    let nx = numeric_grad(x.data(), |v| f(&t(x.shape(), v), &w, &b));
    let nw = numeric_grad(w.data(), |v| f(&x, &t(w.shape(), v), &b));
    let nb = numeric_grad(b.data(), |v| f(&x, &w, &t(b.shape(), v)));
    rel_err(gx.data(), &nx).max(rel_err(gw.data(), &nw)).max(rel_err(gb.data(), &nb))
}

pub fn check_max_pool(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, steps, c) = (r.random_range(1..3), r.random_range(1..7), r.random_range(1..4));
    let x = rand_tensor(&mut r, &[b, steps, c]);
    let (_, cache) = global_max_pool_forward(&x).unwrap();
    let proj = rand_tensor(&mut r, &[b, c]);
    let g = global_max_pool_backward(&cache, &proj);
    let num = numeric_grad(x.data(), |v| dot(global_max_pool_forward(&t(x.shape(), v)).unwrap().0.data(), proj.data()));
    rel_err(g.data(), &num)
}

pub fn check_local_max_pool(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, steps, c, size) = (r.random_range(1..3), r.random_range(1..10), r.random_range(1..4), r.random_range(1..4));
    let x = rand_tensor(&mut r, &[b, steps, c]);
    let (y, cache) = max_pool_forward(&x, size).unwrap();
    let proj = rand_tensor(&mut r, y.shape());
    let g = max_pool_backward(&cache, &proj);
    let num = numeric_grad(x.data(), |v| dot(max_pool_forward(&t(x.shape(), v), size).unwrap().0.data(), proj.data()));
    rel_err(g.data(), &num)
}

pub fn check_softmax_ce(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, c) = (r.random_range(1..5), r.random_range(2..6));
    let logits = rand_tensor(&mut r, &[b, c]);
    let targets: Vec<usize> = (0..b).map(|_| r.random_range(0..c)).collect();
    let weights: Vec<f64> = (0..c).map(|_| r.random_range(0.2..3.0)).collect();
    let (_, g) = softmax_cross_entropy(&logits, &targets, &weights).unwrap();
    let num = numeric_grad(logits.data(), |v| softmax_cross_entropy(&t(&[b, c], v), &targets, &weights).unwrap().0);
    rel_err(g.data(), &num)
}

struct LstmW {
    w_in: Tensor<f64>,
    w_rec: Tensor<f64>,
    bias: Tensor<f64>,
}

impl LstmW {
    fn random(r: &mut ChaCha8Rng, d: usize, h: usize) -> Self {
        LstmW {
            w_in: rand_tensor(r, &[d, 4 * h]),
            w_rec: rand_tensor(r, &[h, 4 * h]),
            bias: rand_tensor(r, &[4 * h]),
        }
    }

    fn p(&self) -> LstmParams<'_, f64> {
        LstmParams {
            w_in: &self.w_in,
            w_rec: &self.w_rec,
            bias: &self.bias,
        }
    }
}

pub fn check_lstm(seed: u64, reverse: bool) -> f64 {
    let mut r = rng(seed);
    let (b, steps, d, h) = (r.random_range(1..3), r.random_range(1..5), r.random_range(1..4), r.random_range(1..4));
    let layer = Lstm { hidden: h, reverse };
    let x = rand_tensor(&mut r, &[b, steps, d]);
    let w = LstmW::random(&mut r, d, h);
    let (y, cache) = layer.forward(&x, w.p()).unwrap();
    let proj = rand_tensor(&mut r, y.shape());
    let (g, gx) = layer.backward(&cache, w.p(), &proj);
    let f = |x: &Tensor<f64>, p: LstmParams<'_, f64>| dot(layer.forward(x, p).unwrap().0.data(), proj.data());
    let nx = numeric_grad(x.data(), |v| f(&t(x.shape(), v), w.p()));
    let nwi = numeric_grad(w.w_in.data(), |v| {
        let wi = t(w.w_in.shape(), v);
        f(&x, LstmParams { w_in: &wi, ..w.p() })
    });
    let nwr = numeric_grad(w.w_rec.data(), |v| {
        let wr = t(w.w_rec.shape(), v);
        f(&x, LstmParams { w_rec: &wr, ..w.p() })
    });
    let nb = numeric_grad(w.bias.data(), |v| {
        let bb = t(w.bias.shape(), v);
        f(&x, LstmParams { bias: &bb, ..w.p() })
    });
    [
        rel_err(gx.data(), &nx),
        rel_err(g.w_in.data(), &nwi),
        rel_err(g.w_rec.data(), &nwr),
        rel_err(g.bias.data(), &nb),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn check_bilstm(seed: u64) -> f64 {
    let mut r = rng(seed);
    let (b, steps, d, h) = (r.random_range(1..3), r.random_range(1..5), r.random_range(1..4), r.random_range(1..3));
    let x = rand_tensor(&mut r, &[b, steps, d]);
    let wf = LstmW::random(&mut r, d, h);
    let wb = LstmW::random(&mut r, d, h);
    let (y, cache) = bilstm_forward(h, &x, wf.p(), wb.p()).unwrap();
    let proj = rand_tensor(&mut r, y.shape());
    let (gf, gb, gx) = bilstm_backward(h, &cache, wf.p(), wb.p(), &proj);
    let f = |x: &Tensor<f64>, pf: LstmParams<'_, f64>, pb: LstmParams<'_, f64>| {
        dot(bilstm_forward(h, x, pf, pb).unwrap().0.data(), proj.data())
    };
    let nx = numeric_grad(x.data(), |v| f(&t(x.shape(), v), wf.p(), wb.p()));
    let nf = numeric_grad(wf.w_in.data(), |v| {
        let wi = t(wf.w_in.shape(), v);
        f(&x, LstmParams { w_in: &wi, ..wf.p() }, wb.p())
    });
    let nb = numeric_grad(wb.w_rec.data(), |v| {
        let wr = t(wb.w_rec.shape(), v);
        f(&x, wf.p(), LstmParams { w_rec: &wr, ..wb.p() })
    });
    rel_err(gx.data(), &nx)
        .max(rel_err(gf.w_in.data(), &nf))
        .max(rel_err(gb.w_rec.data(), &nb))
}

/// 32-bit analytic gradient of a dense+conv stack against 64-bit finite
/// differences.
pub fn check_conv_f32(seed: u64) -> f64 {
    let mut r = rng(seed);
    let conv = Conv1d::same(3).unwrap();
    let x = rand_tensor(&mut r, &[2, 6, 3]);
    let w = rand_tensor(&mut r, &[3, 3, 2]);
    let bias = rand_tensor(&mut r, &[2]);
    let proj = rand_tensor(&mut r, &[2, 6, 2]);
    let (x32, w32, b32, p32) = (x.cast::<f32>(), w.cast::<f32>(), bias.cast::<f32>(), proj.cast::<f32>());
    let (_, cache) = conv.forward(&x32, &w32, &b32).unwrap();
    let mut gw = Tensor::<f32>::zeros(w.shape());
    let mut gb = Tensor::<f32>::zeros(bias.shape());
    conv.backward(&cache, &w32, &p32, &mut gw, &mut gb, false).unwrap();
    let nw = numeric_grad(w.data(), |v| dot(conv.forward(&x, &t(w.shape(), v), &bias).unwrap().0.data(), proj.data()));
    rel_err(&gw.to_f64_vec(), &nw)
}
