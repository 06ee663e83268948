//! Fixed-size embeddings of long token sequences by averaging overlapping
//! windows of a token-embedding provider.

mod head;
mod provider;
mod store;

pub use head::{EmbedClassifier, EmbedTrainConfig};
pub use provider::{EmbeddingProvider, HttpProvider, HttpProviderConfig, MockProvider, CACHE_DIR_ENV};
pub use store::{read_doc_embeddings, write_doc_embeddings, DocEmbeddingStore};

use serde::{Deserialize, Serialize};

use crate::vocab::PAD_ID;
use crate::{Error, Result};

/// Window layout over a document of `doc_len` tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub doc_len: usize,
    pub context: usize,
    pub overlap: usize,
    pub starts: Vec<usize>,
}

impl ChunkPlan {
    pub fn chunk_count(&self) -> usize {
        self.starts.len()
    }

    pub fn stride(&self) -> usize {
        self.context - self.overlap
    }

    /// Token ids and attention mask of chunk `k`, right-padded to the
    /// context length.
    pub fn chunk(&self, tokens: &[usize], k: usize) -> (Vec<usize>, Vec<u8>) {
        let start = self.starts[k];
        let end = (start + self.context).min(tokens.len());
        let mut ids = tokens[start..end].to_vec();
        let mut mask = vec![1u8; ids.len()];
        ids.resize(self.context, PAD_ID);
        mask.resize(self.context, 0);
        (ids, mask)
    }
}

/// Windows of `context` tokens whose starts advance by `context - overlap`.
/// The count is `ceil((L - w) / (l_c - w))`, or 1 when the document fits in
/// a single window; the last window is right-padded.
pub fn plan_chunks(doc_len: usize, context: usize, overlap: usize) -> Result<ChunkPlan> {
    if doc_len == 0 {
        return Err(Error::Empty("cannot plan chunks for an empty document"));
    }
    if context == 0 || overlap >= context {
        return Err(Error::Config(format!(
            "overlap ({overlap}) must be smaller than the context length ({context})"
        )));
    }
    let stride = context - overlap;
    let m = if doc_len <= context {
        1
    } else {
        (doc_len - overlap).div_ceil(stride)
    };
    Ok(ChunkPlan {
        doc_len,
        context,
        overlap,
        starts: (0..m).map(|k| k * stride).collect(),
    })
}

/// How each window's token embeddings are reduced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Mean over real tokens only.
    #[default]
    MaskAware,
    /// Sum over all `l_c` positions, pads included, divided by `l_c`.
    Literal,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mask-aware" => Ok(Pooling::MaskAware),
            "literal" => Ok(Pooling::Literal),
            other => Err(Error::Config(format!("unknown pooling {other:?}; use mask-aware or literal"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentEmbedding {
    pub vector: Vec<f64>,
    pub provider: String,
    pub plan: ChunkPlan,
}

/// Averages per-window mean embeddings over the plan's windows, in window
/// order.
pub fn embed_document(
    tokens: &[usize],
    provider: &dyn EmbeddingProvider,
    context: usize,
    overlap: usize,
    pooling: Pooling,
) -> Result<DocumentEmbedding> {
    if provider.context_capacity() < context {
        return Err(Error::Config(format!(
            "provider {} accepts {} tokens, fewer than the context length {context}",
            provider.id(),
            provider.context_capacity()
        )));
    }
    let plan = plan_chunks(tokens.len(), context, overlap)?;
    let d = provider.dim();
    let mut total = vec![0.0f64; d];
    for k in 0..plan.chunk_count() {
        let (ids, mask) = plan.chunk(tokens, k);
        let rows = provider.embed_chunk(&ids, &mask).map_err(|e| match e {
            Error::Provider { reason, .. } => Error::Provider { chunk: k, reason },
            other => Error::Provider {
                chunk: k,
                reason: other.to_string(),
            },
        })?;
        if rows.len() != context || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Provider {
                chunk: k,
                reason: format!("expected {context} rows of dimension {d}"),
            });
        }
        let mut sum = vec![0.0f64; d];
        let mut count = 0usize;
        for (row, &m) in rows.iter().zip(&mask) {
            if pooling == Pooling::Literal || m == 1 {
                for (s, &v) in sum.iter_mut().zip(row) {
                    *s += v;
                }
                count += 1;
            }
        }
        let denom = match pooling {
            Pooling::MaskAware => count,
            Pooling::Literal => context,
        } as f64;
        for (t, s) in total.iter_mut().zip(&sum) {
            *t += s / denom;
        }
    }
    let m = plan.chunk_count() as f64;
    let vector: Vec<f64> = total.into_iter().map(|t| t / m).collect();
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged(format!("document embedding from {} is not finite", provider.id())));
    }
    Ok(DocumentEmbedding {
        vector,
        provider: provider.id(),
        plan,
    })
}
