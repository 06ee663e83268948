use crate::checkpoint::ModelCheckpoint;
use crate::nn::{
    bilstm_backward, bilstm_forward, dense_backward, dense_forward, embedding_backward, embedding_forward,
    global_max_pool_backward, global_max_pool_forward, glorot, max_pool_backward, max_pool_forward, relu_backward, relu_inplace, softmax_rows, uniform,
    BiLstmCache, Conv1d, ConvCache, LocalPoolCache, LstmParams, MaxPoolCache, Param, ParamSet, Scalar, Tensor,
};
use crate::vocab::CharVocab;
use crate::{seed, Error, Result};

use super::ArchConfig;

pub const CHECKPOINT_KIND: &str = "classifier";

#[derive(Clone, Debug)]
struct LstmIdx {
    w_in: usize,
    w_rec: usize,
    bias: usize,
}

#[derive(Clone, Debug)]
struct ConvIdx {
    op: Conv1d,
    kernels: usize,
    bias: usize,
    /// 1×1 projection on the skip path
    proj: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
struct Layout {
    embedding: usize,
    bilstm: Option<(LstmIdx, LstmIdx)>,
    stem: Option<ConvIdx>,
    convs: Vec<ConvIdx>,
    /// hidden dense layers followed by the output layer
    dense: Vec<(usize, usize)>,
}

/// Residual 1D-CNN text classifier over character ids.
#[derive(Clone, Debug)]
pub struct ResCnn<T> {
    pub arch: ArchConfig,
    pub vocab: CharVocab,
    pub params: ParamSet<T>,
    layout: Layout,
}

struct ConvLayerCache<T> {
    conv: ConvCache<T>,
    /// relu(conv(h))
    act: Tensor<T>,
    proj: Option<ConvCache<T>>,
}

/// Activations kept for the backward pass.
pub struct ForwardCache<T> {
    ids: Vec<usize>,
    batch: usize,
    bilstm: Option<BiLstmCache<T>>,
    stem: Option<(ConvCache<T>, Tensor<T>, LocalPoolCache)>,
    convs: Vec<ConvLayerCache<T>>,
    pool: MaxPoolCache,
    dense_inputs: Vec<Tensor<T>>,
    /// Input and output of the residual stack, exposed for identity checks.
    pub stack_input: Tensor<T>,
    pub stack_output: Tensor<T>,
}

fn lstm_params<'a, T: Scalar>(params: &'a ParamSet<T>, idx: &LstmIdx) -> LstmParams<'a, T> {
    LstmParams {
        w_in: params.value(idx.w_in),
        w_rec: params.value(idx.w_rec),
        bias: params.value(idx.bias),
    }
}

impl<T: Scalar> ResCnn<T> {
    /// Builds the network with weights drawn from `seed`. When given,
    /// `init_embeddings` (`[V, E]`) replaces the random embedding table.
    pub fn build(arch: &ArchConfig, vocab: &CharVocab, init_embeddings: Option<&Tensor<f32>>, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = seed::rng(seed, "classifier-init", 0);
        let v = vocab.size();
        let e = arch.embed_dim;
        let mut params = ParamSet::new();

        let table = match init_embeddings {
            Some(t) if t.shape() == [v, e] => t.cast(),
            Some(t) => {
                return Err(Error::Shape(format!(
                    "initial embeddings {:?} do not match vocab size {v} and embed_dim {e}",
                    t.shape()
                )))
            }
            None => uniform(&mut rng, &[v, e], 0.05),
        };
        let embedding = params.push(Param::new("embedding", table, false));
        let mut width = e;

        let bilstm = if arch.bilstm_front {
            let h = arch.bilstm_units;
            let mut dir = |name: &str, params: &mut ParamSet<T>| {
                let w_in = params.push(Param::new(format!("bilstm.{name}.w_in"), glorot(&mut rng, &[width, 4 * h], width, 4 * h), false));
                let w_rec = params.push(Param::new(format!("bilstm.{name}.w_rec"), glorot(&mut rng, &[h, 4 * h], h, 4 * h), false));
                let mut b = Tensor::zeros(&[4 * h]);
                b.data_mut()[h..2 * h].iter_mut().for_each(|x| *x = T::one());
                let bias = params.push(Param::new(format!("bilstm.{name}.bias"), b, false));
                LstmIdx { w_in, w_rec, bias }
            };
            let fw = dir("fwd", &mut params);
            let bw = dir("bwd", &mut params);
            width = 2 * h;
            Some((fw, bw))
        } else {
            None
        };

        let stem = if arch.downsample > 1 {
            let (k, c) = (arch.stem_kernel, arch.stem_filters);
            let kernels = params.push(Param::new("stem.kernels", glorot(&mut rng, &[k, width, c], k * width, k * c), false));
            let bias = params.push(Param::new("stem.bias", Tensor::zeros(&[c]), false));
            width = c;
            Some(ConvIdx {
                op: Conv1d::same(k)?,
                kernels,
                bias,
                proj: None,
            })
        } else {
            None
        };

        let mut convs = Vec::with_capacity(arch.conv_layers.len());
        for (i, spec) in arch.conv_layers.iter().enumerate() {
            let (k, c) = (spec.kernel, spec.filters);
            let kernels = params.push(Param::new(format!("conv{i}.kernels"), glorot(&mut rng, &[k, width, c], k * width, k * c), false));
            let bias = params.push(Param::new(format!("conv{i}.bias"), Tensor::zeros(&[c]), false));
            let proj = if arch.residual && width != c {
                let pk = params.push(Param::new(format!("conv{i}.proj.kernels"), glorot(&mut rng, &[1, width, c], width, c), false));
                let pb = params.push(Param::new(format!("conv{i}.proj.bias"), Tensor::zeros(&[c]), false));
                Some((pk, pb))
            } else {
                None
            };
            convs.push(ConvIdx {
                op: Conv1d::same(k)?,
                kernels,
                bias,
                proj,
            });
            width = c;
        }

        let mut dense = Vec::new();
        let outputs = arch.dense_units.iter().copied().chain(std::iter::once(arch.n_classes));
        for (i, units) in outputs.enumerate() {
            let name = if i == arch.dense_units.len() { "output".to_string() } else { format!("dense{i}") };
            let w = params.push(Param::new(format!("{name}.weight"), glorot(&mut rng, &[width, units], width, units), true));
            let b = params.push(Param::new(format!("{name}.bias"), Tensor::zeros(&[units]), false));
            dense.push((w, b));
            width = units;
        }

        Ok(ResCnn {
            arch: arch.clone(),
            vocab: vocab.clone(),
            params,
            layout: Layout {
                embedding,
                bilstm,
                stem,
                convs,
                dense,
            },
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        let cfg = serde_json::to_value(&self.arch).expect("arch serializes");
        ModelCheckpoint::new(CHECKPOINT_KIND, cfg, Some(&self.vocab), &self.params)
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let arch: ArchConfig = serde_json::from_value(ckpt.config.clone())?;
        let vocab = ckpt
            .vocab
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("classifier checkpoint has no vocabulary".into()))?;
        let mut model = ResCnn::build(&arch, vocab, None, 0)?;
        ckpt.load_into(&mut model.params)?;
        Ok(model)
    }

    /// Encodes a text to this model's fixed input length.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        self.vocab.encode_with(text, self.arch.max_len, self.arch.truncation)
    }

    /// Logits `[B, n_classes]` for `batch` sequences of `max_len` ids laid
    /// out back to back in `ids`.
    pub fn forward(&self, ids: &[usize], batch: usize) -> Result<(Tensor<T>, ForwardCache<T>)> {
        let steps = self.arch.max_len;
        if ids.len() != batch * steps {
            return Err(Error::Shape(format!("{} ids for {batch} sequences of {steps}", ids.len())));
        }
        let p = &self.params;
        let l = &self.layout;
        let mut x = embedding_forward(ids, p.value(l.embedding))?.reshape(&[batch, steps, self.arch.embed_dim])?;

        let bilstm = match &l.bilstm {
            Some((fw, bw)) => {
                let (y, cache) = bilstm_forward(self.arch.bilstm_units, &x, lstm_params(p, fw), lstm_params(p, bw))?;
                x = y;
                Some(cache)
            }
            None => None,
        };

        let stem = match &l.stem {
            Some(s) => {
                let (mut y, cache) = s.op.forward(&x, p.value(s.kernels), p.value(s.bias))?;
                relu_inplace(y.data_mut());
                let (pooled, pool) = max_pool_forward(&y, self.arch.downsample)?;
                x = pooled;
                Some((cache, y, pool))
            }
            None => None,
        };

        let stack_input = x.clone();
        let mut convs = Vec::with_capacity(l.convs.len());
        for c in &l.convs {
            let (mut act, conv) = c.op.forward(&x, p.value(c.kernels), p.value(c.bias))?;
            relu_inplace(act.data_mut());
            let mut next = act.clone();
            let mut proj_cache = None;
            if self.arch.residual {
                match c.proj {
                    Some((pk, pb)) => {
                        let (skip, pc) = Conv1d::same(1)?.forward(&x, p.value(pk), p.value(pb))?;
                        next.add_assign(&skip);
                        proj_cache = Some(pc);
                    }
                    None => next.add_assign(&x),
                }
            }
            convs.push(ConvLayerCache {
                conv,
                act,
                proj: proj_cache,
            });
            x = next;
        }
        let stack_output = x.clone();

        let (mut h, pool) = global_max_pool_forward(&x)?;
        let mut dense_inputs = Vec::with_capacity(l.dense.len());
        let last = l.dense.len() - 1;
        for (i, &(w, b)) in l.dense.iter().enumerate() {
            let mut y = dense_forward(&h, p.value(w), p.value(b))?;
            if i != last {
                relu_inplace(y.data_mut());
            }
            dense_inputs.push(std::mem::replace(&mut h, y));
        }
        let cache = ForwardCache {
            ids: ids.to_vec(),
            batch,
            bilstm,
            stem,
            convs,
            pool,
            dense_inputs,
            stack_input,
            stack_output,
        };
        Ok((h, cache))
    }

    /// Accumulates parameter gradients given `d loss / d logits`.
    pub fn backward(&mut self, cache: &ForwardCache<T>, grad_logits: &Tensor<T>) -> Result<()> {
        let l = self.layout.clone();
        let p = &mut self.params;

        let mut g = grad_logits.clone();
        for (i, &(w, b)) in l.dense.iter().enumerate().rev() {
            let input = &cache.dense_inputs[i];
            let (pw, pb) = p.pair_mut(w, b);
            g = dense_backward(input, &pw.value, &g, &mut pw.grad, &mut pb.grad, true).expect("input grad requested");
            if i > 0 {
                // input of layer i is the relu output of layer i-1
                relu_backward(input.data(), g.data_mut());
            }
        }

        let mut g = global_max_pool_backward(&cache.pool, &g);
        for (c, lc) in l.convs.iter().zip(&cache.convs).rev() {
            let mut g_act = g.clone();
            relu_backward(lc.act.data(), g_act.data_mut());
            let (pk, pb) = p.pair_mut(c.kernels, c.bias);
            let mut gx = c
                .op
                .backward(&lc.conv, &pk.value, &g_act, &mut pk.grad, &mut pb.grad, true)?
                .expect("input grad requested");
            if self.arch.residual {
                match (c.proj, &lc.proj) {
                    (Some((k, b)), Some(pc)) => {
                        let (pk, pb) = p.pair_mut(k, b);
                        let gs = Conv1d::same(1)?
                            .backward(pc, &pk.value, &g, &mut pk.grad, &mut pb.grad, true)?
                            .expect("input grad requested");
                        gx.add_assign(&gs);
                    }
                    _ => gx.add_assign(&g),
                }
            }
            g = gx;
        }

        if let (Some(s), Some((sc, out, pool))) = (&l.stem, &cache.stem) {
            g = max_pool_backward(pool, &g);
            relu_backward(out.data(), g.data_mut());
            let (pk, pb) = p.pair_mut(s.kernels, s.bias);
            g = s
                .op
                .backward(sc, &pk.value, &g, &mut pk.grad, &mut pb.grad, true)?
                .expect("input grad requested");
        }

        if let (Some((fw, bw)), Some(bc)) = (&l.bilstm, &cache.bilstm) {
            let (gf, gb, gx) = bilstm_backward(self.arch.bilstm_units, bc, lstm_params(p, fw), lstm_params(p, bw), &g);
            p.grad_mut(fw.w_in).add_assign(&gf.w_in);
            p.grad_mut(fw.w_rec).add_assign(&gf.w_rec);
            p.grad_mut(fw.bias).add_assign(&gf.bias);
            p.grad_mut(bw.w_in).add_assign(&gb.w_in);
            p.grad_mut(bw.w_rec).add_assign(&gb.w_rec);
            p.grad_mut(bw.bias).add_assign(&gb.bias);
            g = gx;
        }

        debug_assert_eq!(cache.ids.len(), cache.batch * self.arch.max_len);
        embedding_backward(&cache.ids, g.data(), p.grad_mut(l.embedding));
        Ok(())
    }

    /// Class probabilities `[B, n_classes]`.
    pub fn predict_proba(&self, ids: &[usize], batch: usize) -> Result<Tensor<T>> {
        let (logits, _) = self.forward(ids, batch)?;
        Ok(softmax_rows(&logits))
    }

    pub fn embedding_table(&self) -> &Tensor<T> {
        self.params.value(self.layout.embedding)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
