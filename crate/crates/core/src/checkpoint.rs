//! Versioned checkpoint container: a JSON header followed by named parameter
//! blobs of little-endian 32-bit floats.
//!
//! ```text
//! magic   b"LOGTRCKP"          8 bytes
//! version u32 LE               4 bytes
//! hlen    u64 LE               8 bytes
//! header  UTF-8 JSON           hlen bytes
//! blobs   f32 LE, header order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{Param, ParamSet, Scalar, Tensor};
use crate::vocab::CharVocab;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LOGTRCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Element offset into the blob section.
    pub offset: usize,
    pub decay: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    config: serde_json::Value,
    vocab: Option<Vec<String>>,
    vocab_hash: Option<String>,
    metrics: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Architecture config, vocabulary and every parameter of a trained model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    /// Model family, e.g. `"lm"` or `"classifier"`.
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab: Option<CharVocab>,
    pub metrics: serde_json::Value,
    pub tensors: Vec<(TensorEntry, Vec<f32>)>,
}

impl ModelCheckpoint {
    pub fn new<T: Scalar>(kind: &str, config: serde_json::Value, vocab: Option<&CharVocab>, params: &ParamSet<T>) -> Self {
        let mut offset = 0;
        let tensors = params
            .iter()
            .map(|p| {
                let entry = TensorEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    offset,
                    decay: p.decay,
                };
                offset += p.value.len();
                let data = p.value.data().iter().map(|x| x.to_f64_lossy() as f32).collect();
                (entry, data)
            })
            .collect();
        ModelCheckpoint {
            kind: kind.to_string(),
            config,
            vocab: vocab.cloned(),
            metrics: serde_json::Value::Null,
            tensors,
        }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!("expected a {kind} checkpoint, found {}", self.kind)));
        }
        Ok(())
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor<f32>> {
        self.tensors
            .iter()
            .find(|(e, _)| e.name == name)
            .map(|(e, d)| Tensor::from_vec(&e.shape, d.clone()).expect("entry shape matches data"))
    }

    /// Rebuilds a parameter set. Names and order must match `template`.
    pub fn load_into<T: Scalar>(&self, template: &mut ParamSet<T>) -> Result<()> {
        if template.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                template.len()
            )));
        }
        for (p, (entry, data)) in template.iter_mut().zip(&self.tensors) {
            if p.name != entry.name || p.value.shape() != entry.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match model parameter {} {:?}",
                    entry.name,
                    entry.shape,
                    p.name,
                    p.value.shape()
                )));
            }
            let values = data.iter().map(|&x| T::from_f64_lossy(f64::from(x))).collect();
            *p = Param::new(p.name.clone(), Tensor::from_vec(&entry.shape, values)?, p.decay);
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind.clone(),
            config: self.config.clone(),
            vocab: self.vocab.as_ref().map(CharVocab::tokens),
            vocab_hash: self.vocab.as_ref().map(CharVocab::hash),
            metrics: self.metrics.clone(),
            tensors: self.tensors.iter().map(|(e, _)| e.clone()).collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let n: usize = self.tensors.iter().map(|(_, d)| d.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 4 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, data) in &self.tensors {
            for x in data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(bad("truncated header"));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        let blobs = &body[hlen..];
        let vocab = header.vocab.as_deref().map(CharVocab::from_tokens).transpose()?;
        if let (Some(v), Some(h)) = (&vocab, &header.vocab_hash) {
            if &v.hash() != h {
                return Err(bad("vocabulary hash mismatch"));
            }
        }
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for entry in header.tensors {
            let n: usize = entry.shape.iter().product();
            let start = entry.offset * 4;
            let end = start + n * 4;
            if end > blobs.len() {
                return Err(Error::Checkpoint(format!("tensor {} runs past end of file", entry.name)));
            }
            let data = blobs[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push((entry, data));
        }
        Ok(ModelCheckpoint {
            kind: header.kind,
            config: header.config,
            vocab,
            metrics: header.metrics,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelCheckpoint {
        let mut ps = ParamSet::<f32>::new();
        ps.push(Param::new("a", Tensor::from_vec(&[2, 2], vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE]).unwrap(), false));
        ps.push(Param::new("b", Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap(), true));
        let vocab = CharVocab::build("ab\n").unwrap();
        let mut ck = ModelCheckpoint::new("test", serde_json::json!({"k": 1}), Some(&vocab), &ps);
        ck.metrics = serde_json::json!({"accuracy": 0.5});
        ck
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let ck = sample();
        let back = ModelCheckpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(ck, back);
        assert_eq!(back.tensor("b").unwrap().data(), &[0.1, 0.2, 0.3]);
    }

    #[test]
    fn load_into_checks_layout() {
        let ck = sample();
        let mut ok = ParamSet::<f64>::new();
        ok.push(Param::new("a", Tensor::zeros(&[2, 2]), false));
        ok.push(Param::new("b", Tensor::zeros(&[3]), true));
        ck.load_into(&mut ok).unwrap();
        assert_eq!(ok.value(0).data()[1], -2.5);

        let mut wrong = ParamSet::<f64>::new();
        wrong.push(Param::new("a", Tensor::zeros(&[4]), false));
        wrong.push(Param::new("b", Tensor::zeros(&[3]), true));
        assert!(ck.load_into(&mut wrong).is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(ModelCheckpoint::from_bytes(b"nope").is_err());
        let mut bytes = sample().to_bytes();
        bytes.truncate(bytes.len() - 3);
        assert!(ModelCheckpoint::from_bytes(&bytes).is_err());
    }
}
