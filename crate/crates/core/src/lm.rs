//! Character-level sequence-to-sequence LSTM language model.
//!
//! embedding(V×E) → LSTM(H, full sequence) → dense(V) at every timestep,
//! trained with teacher forcing to predict the input shifted by `shift`
//! characters. The learned embedding table is what downstream models use.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::checkpoint::ModelCheckpoint;
use crate::nn::{
    dense_backward, dense_forward, embedding_backward, embedding_forward, glorot, softmax_cross_entropy,
    softmax_rows, uniform, Adam, AdamState, Lstm, LstmParams, Param, ParamSet, Scalar, Tensor,
};
use crate::vocab::CharVocab;
use crate::{seed, Error, Result};

pub const CHECKPOINT_KIND: &str = "lm";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    /// Input/target length `l_s` in characters.
    pub seq_len: usize,
    /// Target shift `l_w`.
    pub shift: usize,
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without training-loss improvement before stopping.
    pub patience: usize,
    /// Random subset of pairs visited per epoch; `None` visits all.
    pub max_pairs_per_epoch: Option<usize>,
    pub seed: u64,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            seq_len: 100,
            shift: 1,
            embed_dim: 64,
            lstm_units: 1024,
            lr: 1e-4,
            batch_size: 64,
            max_epochs: 200,
            patience: 30,
            max_pairs_per_epoch: None,
            seed: 0,
        }
    }
}

impl LmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shift < 1 || self.shift > self.seq_len {
            return Err(Error::Config(format!(
                "lm.shift must satisfy 1 <= shift <= seq_len ({}), got {}",
                self.seq_len, self.shift
            )));
        }
        if self.embed_dim == 0 || self.lstm_units == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("lm dimensions, batch size and epochs must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lm.lr must be positive".into()));
        }
        Ok(())
    }
}

/// Closed-form parameter count: `V·E + 4((E+H)H + H) + (H·V + V)`.
pub fn lm_param_count(cfg: &LmConfig, vocab_size: usize) -> usize {
    let (v, e, h) = (vocab_size, cfg.embed_dim, cfg.lstm_units);
    v * e + 4 * ((e + h) * h + h) + (h * v + v)
}

fn is_block_start(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("I:") || t.starts_with("C:")
}

/// Character lengths of the message blocks in `corpus`. A block runs from
/// a line starting with `I:` or `C:` up to the next such line.
pub fn block_lengths(corpus: &str) -> Vec<usize> {
    let mut lengths = Vec::new();
    let mut current: Option<usize> = None;
    for line in corpus.split_inclusive('\n') {
        let n = line.chars().count();
        if is_block_start(line) {
            if let Some(len) = current.take() {
                lengths.push(len);
            }
            current = Some(n);
        } else if let Some(len) = current.as_mut() {
            *len += n;
        }
    }
    lengths.extend(current);
    lengths
}

/// Lower median of the block lengths.
pub fn median_block_length(corpus: &str) -> Result<usize> {
    let mut lengths = block_lengths(corpus);
    if lengths.is_empty() {
        return Err(Error::Config(
            "no I:/C: message blocks found in corpus; set lm.seq_len explicitly".into(),
        ));
    }
    lengths.sort_unstable();
    Ok(lengths[(lengths.len() - 1) / 2])
}

/// Input/target windows over a continuous id sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SequencePair<'a> {
    pub input: &'a [usize],
    pub target: &'a [usize],
}

/// All `(s_i, s_t)` pairs of a corpus: pair `j` reads `ids[j·shift..][..seq_len]`
/// and its target starts `shift` later. A trailing remainder is dropped.
#[derive(Clone, Copy, Debug)]
pub struct SequencePairs<'a> {
    ids: &'a [usize],
    seq_len: usize,
    shift: usize,
    count: usize,
}

pub fn make_sequence_pairs(ids: &[usize], seq_len: usize, shift: usize) -> Result<SequencePairs<'_>> {
    if seq_len == 0 || shift == 0 {
        return Err(Error::Config("sequence length and shift must be positive".into()));
    }
    if ids.len() < seq_len + shift {
        return Err(Error::Config(format!(
            "corpus of {} ids is too short for seq_len {seq_len} + shift {shift}",
            ids.len()
        )));
    }
    let count = (ids.len() - seq_len - shift) / shift + 1;
    Ok(SequencePairs {
        ids,
        seq_len,
        shift,
        count,
    })
}

impl<'a> SequencePairs<'a> {
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn get(&self, j: usize) -> SequencePair<'a> {
        assert!(j < self.count);
        let start = j * self.shift;
        SequencePair {
            input: &self.ids[start..start + self.seq_len],
            target: &self.ids[start + self.shift..start + self.shift + self.seq_len],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SequencePair<'a>> + '_ {
        (0..self.count).map(move |j| self.get(j))
    }
}

/// The model's parameters and forward/backward passes.
#[derive(Clone, Debug)]
pub struct CharLm<T> {
    pub cfg: LmConfig,
    pub vocab_size: usize,
    pub params: ParamSet<T>,
}

const EMB: usize = 0;
const W_IN: usize = 1;
const W_REC: usize = 2;
const BIAS: usize = 3;
const OUT_W: usize = 4;
const OUT_B: usize = 5;

impl<T: Scalar> CharLm<T> {
    pub fn new(cfg: &LmConfig, vocab_size: usize) -> Self {
        let mut rng = seed::rng(cfg.seed, "lm-init", 0);
        let (v, e, h) = (vocab_size, cfg.embed_dim, cfg.lstm_units);
        let mut params = ParamSet::new();
        params.push(Param::new("embedding", uniform(&mut rng, &[v, e], 0.05), false));
        params.push(Param::new("lstm.w_in", glorot(&mut rng, &[e, 4 * h], e, 4 * h), false));
        params.push(Param::new("lstm.w_rec", glorot(&mut rng, &[h, 4 * h], h, 4 * h), false));
        let mut bias = Tensor::zeros(&[4 * h]);
        bias.data_mut()[h..2 * h].iter_mut().for_each(|b| *b = T::one());
        params.push(Param::new("lstm.bias", bias, false));
        params.push(Param::new("dense.weight", glorot(&mut rng, &[h, v], h, v), false));
        params.push(Param::new("dense.bias", Tensor::zeros(&[v]), false));
        CharLm {
            cfg: cfg.clone(),
            vocab_size,
            params,
        }
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint) -> Result<Self> {
        ckpt.expect_kind(CHECKPOINT_KIND)?;
        let cfg: LmConfig = serde_json::from_value(ckpt.config.clone())?;
        let vocab = ckpt
            .vocab
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("language model checkpoint has no vocabulary".into()))?;
        let mut model = CharLm::new(&cfg, vocab.size());
        ckpt.load_into(&mut model.params)?;
        Ok(model)
    }

    pub fn to_checkpoint(&self, vocab: &CharVocab) -> ModelCheckpoint {
        let cfg = serde_json::to_value(&self.cfg).expect("config serializes");
        ModelCheckpoint::new(CHECKPOINT_KIND, cfg, Some(vocab), &self.params)
    }

    fn lstm_params(&self) -> LstmParams<'_, T> {
        LstmParams {
            w_in: self.params.value(W_IN),
            w_rec: self.params.value(W_REC),
            bias: self.params.value(BIAS),
        }
    }

    /// Logits `[B·L, V]` for `batch` sequences of equal length.
    pub fn logits(&self, inputs: &[&[usize]]) -> Result<Tensor<T>> {
        let steps = inputs.first().map_or(0, |s| s.len());
        let flat: Vec<usize> = inputs.iter().flat_map(|s| s.iter().copied()).collect();
        let x = embedding_forward(&flat, self.params.value(EMB))?.reshape(&[inputs.len(), steps, self.cfg.embed_dim])?;
        let (hs, _) = Lstm::new(self.cfg.lstm_units).forward(&x, self.lstm_params())?;
        let hs = hs.reshape(&[inputs.len() * steps, self.cfg.lstm_units])?;
        dense_forward(&hs, self.params.value(OUT_W), self.params.value(OUT_B))
    }

    /// Mean per-character cross-entropy over a batch; accumulates gradients.
    pub fn loss_and_grad(&mut self, batch: &[SequencePair<'_>]) -> Result<f64> {
        let b = batch.len();
        let steps = batch[0].input.len();
        let (e, h, v) = (self.cfg.embed_dim, self.cfg.lstm_units, self.vocab_size);
        let ids: Vec<usize> = batch.iter().flat_map(|p| p.input.iter().copied()).collect();
        let targets: Vec<usize> = batch.iter().flat_map(|p| p.target.iter().copied()).collect();

        let x = embedding_forward(&ids, self.params.value(EMB))?.reshape(&[b, steps, e])?;
        let lstm = Lstm::new(h);
        let (hs, cache) = lstm.forward(&x, self.lstm_params())?;
        let hs = hs.reshape(&[b * steps, h])?;
        let logits = dense_forward(&hs, self.params.value(OUT_W), self.params.value(OUT_B))?;
        let ones = vec![T::one(); v];
        let (loss, grad) = softmax_cross_entropy(&logits, &targets, &ones)?;

        let (pw, pb) = self.params.pair_mut(OUT_W, OUT_B);
        let dh = dense_backward(&hs, &pw.value, &grad, &mut pw.grad, &mut pb.grad, true)
            .expect("input grad requested")
            .reshape(&[b, steps, h])?;
        let (grads, dx) = lstm.backward(&cache, self.lstm_params(), &dh);
        self.params.grad_mut(W_IN).add_assign(&grads.w_in);
        self.params.grad_mut(W_REC).add_assign(&grads.w_rec);
        self.params.grad_mut(BIAS).add_assign(&grads.bias);
        embedding_backward(&ids, dx.data(), self.params.grad_mut(EMB));
        Ok(loss)
    }

    /// Mean loss over the given pairs without touching gradients.
    pub fn eval_loss(&self, pairs: &[SequencePair<'_>]) -> Result<f64> {
        let mut total = 0.0;
        for chunk in pairs.chunks(self.cfg.batch_size.max(1)) {
            let inputs: Vec<&[usize]> = chunk.iter().map(|p| p.input).collect();
            let targets: Vec<usize> = chunk.iter().flat_map(|p| p.target.iter().copied()).collect();
            let logits = self.logits(&inputs)?;
            let (loss, _) = softmax_cross_entropy(&logits, &targets, &vec![T::one(); self.vocab_size])?;
            total += loss * chunk.len() as f64;
        }
        Ok(total / pairs.len() as f64)
    }

    /// Next-character distribution after reading `context`.
    pub fn next_char_probs(&self, context: &[usize]) -> Result<Vec<f64>> {
        if context.is_empty() {
            return Err(Error::Empty("next-character prediction needs context"));
        }
        let logits = self.logits(&[context])?;
        let v = self.vocab_size;
        let last = Tensor::from_vec(&[1, v], logits.data()[(context.len() - 1) * v..].to_vec())?;
        Ok(softmax_rows(&last).to_f64_vec())
    }

    pub fn embeddings(&self) -> &Tensor<T> {
        self.params.value(EMB)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LmHistory {
    /// Mean training loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub best_epoch: usize,
    /// Loss before any update, measured on the first epoch's batches.
    pub initial_loss: f64,
}

/// Trains the language model; returns the best-by-training-loss weights.
/// `on_improve` is called with each new best checkpoint.
pub fn lm_train_with(
    pairs: &SequencePairs<'_>,
    vocab: &CharVocab,
    cfg: &LmConfig,
    mut on_improve: impl FnMut(usize, &ModelCheckpoint) -> Result<()>,
) -> Result<(ModelCheckpoint, LmHistory)> {
    cfg.validate()?;
    if pairs.seq_len() != cfg.seq_len {
        return Err(Error::Config(format!(
            "pairs built with seq_len {} but config says {}",
            pairs.seq_len(),
            cfg.seq_len
        )));
    }
    let mut model = CharLm::<f32>::new(cfg, vocab.size());
    let adam = Adam::with_lr(cfg.lr);
    let mut state = AdamState::new(&model.params);
    let mut history = LmHistory::default();
    let mut best = f64::INFINITY;
    let mut best_values = model.params.values();
    let mut since_best = 0;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut seed::rng(cfg.seed, "lm-shuffle", epoch as u64));
        if let Some(cap) = cfg.max_pairs_per_epoch {
            order.truncate(cap.max(1));
        }
        if epoch == 0 {
            let probe: Vec<SequencePair<'_>> = order.iter().take(cfg.batch_size * 4).map(|&j| pairs.get(j)).collect();
            history.initial_loss = model.eval_loss(&probe)?;
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<SequencePair<'_>> = chunk.iter().map(|&j| pairs.get(j)).collect();
            model.params.zero_grad();
            let loss = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("language model loss is {loss} at epoch {}", epoch + 1)));
            }
            adam.step(&mut model.params, &mut state);
            total += loss * batch.len() as f64;
        }
        let epoch_loss = total / order.len() as f64;
        history.epoch_loss.push(epoch_loss);
        log::info!("lm epoch {}: loss {epoch_loss:.5}", epoch + 1);
        if epoch_loss < best {
            best = epoch_loss;
            best_values = model.params.values();
            history.best_epoch = epoch + 1;
            since_best = 0;
            on_improve(epoch, &model.to_checkpoint(vocab))?;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    model.params.restore(best_values);
    let mut ckpt = model.to_checkpoint(vocab);
    ckpt.metrics = serde_json::json!({ "train_loss": best, "epochs": history.epoch_loss.len() });
    Ok((ckpt, history))
}

pub fn lm_train(pairs: &SequencePairs<'_>, vocab: &CharVocab, cfg: &LmConfig) -> Result<(ModelCheckpoint, LmHistory)> {
    lm_train_with(pairs, vocab, cfg, |_, _| Ok(()))
}

/// The trained embedding table `[V, E]` together with its vocabulary.
pub fn extract_char_embeddings(ckpt: &ModelCheckpoint) -> Result<(Tensor<f32>, CharVocab)> {
    ckpt.expect_kind(CHECKPOINT_KIND)?;
    let cfg: LmConfig = serde_json::from_value(ckpt.config.clone())?;
    let vocab = ckpt
        .vocab
        .clone()
        .ok_or_else(|| Error::Checkpoint("language model checkpoint has no vocabulary".into()))?;
    let table = ckpt
        .tensor("embedding")
        .ok_or_else(|| Error::Checkpoint("checkpoint has no embedding tensor".into()))?;
    if table.shape() != [vocab.size(), cfg.embed_dim] {
        return Err(Error::Checkpoint(format!(
            "embedding {:?} does not match vocab size {} and embed_dim {}",
            table.shape(),
            vocab.size(),
            cfg.embed_dim
        )));
    }
    Ok((table, vocab))
}

const EMB_MAGIC: &[u8; 8] = b"LOGTREMB";

/// Embedding export: magic, `u32` V, `u32` E, 64-byte hex vocab hash, then
/// `V·E` row-major little-endian `f32`.
pub fn write_embeddings(path: &Path, table: &Tensor<f32>, vocab: &CharVocab) -> Result<()> {
    let (v, e) = match *table.shape() {
        [v, e] => (v, e),
        ref s => return Err(Error::Shape(format!("embedding table must be 2D, got {s:?}"))),
    };
    let mut out = Vec::with_capacity(80 + 4 * table.len());
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(&(e as u32).to_le_bytes());
    out.extend_from_slice(vocab.hash().as_bytes());
    for x in table.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|err| Error::io(path, err))?;
    f.write_all(&out).map_err(|err| Error::io(path, err))
}

/// Reads an embedding export; returns the table and the vocab hash it was
/// written for.
pub fn read_embeddings(path: &Path) -> Result<(Tensor<f32>, String)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 80 || &bytes[..8] != EMB_MAGIC {
        return Err(Error::Checkpoint(format!("{} is not an embedding export", path.display())));
    }
    let v = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let e = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let hash = String::from_utf8_lossy(&bytes[16..80]).into_owned();
    let body = &bytes[80..];
    if body.len() != v * e * 4 {
        return Err(Error::Checkpoint(format!("embedding export body has {} bytes, expected {}", body.len(), v * e * 4)));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok((Tensor::from_vec(&[v, e], data)?, hash))
}
