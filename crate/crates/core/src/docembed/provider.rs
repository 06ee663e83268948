use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{seed, Error, Result};

/// Environment variable naming the response cache directory of
/// [`HttpProvider`].
pub const CACHE_DIR_ENV: &str = "LOGTRIAGE_CACHE_DIR";

/// Source of per-token embeddings for one window of tokens.
pub trait EmbeddingProvider {
    fn id(&self) -> String;
    fn context_capacity(&self) -> usize;
    fn dim(&self) -> usize;
    /// One row of length `dim()` per input token, pads included.
    fn embed_chunk(&self, tokens: &[usize], mask: &[u8]) -> Result<Vec<Vec<f64>>>;
}

/// Deterministic hashed token table; values are multiples of 2⁻¹⁰ in
/// [-1, 1], so sums of them are exact in `f64`.
#[derive(Clone, Debug)]
pub struct MockProvider {
    dim: usize,
    seed: u64,
    capacity: usize,
}

impl MockProvider {
    pub fn new(dim: usize, seed: u64, capacity: usize) -> Self {
        MockProvider { dim, seed, capacity }
    }

    pub fn row(&self, token: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|j| {
                let key = seed::derive(self.seed, "mock-provider", (token * self.dim + j) as u64);
                (seed::hash_unit(key) * 1024.0).round() / 1024.0
            })
            .collect()
    }

    pub fn table_rows(&self, tokens: &[usize]) -> Vec<Vec<f64>> {
        tokens.iter().map(|&t| self.row(t)).collect()
    }
}

impl EmbeddingProvider for MockProvider {
    fn id(&self) -> String {
        format!("mock:d{}:s{}", self.dim, self.seed)
    }

    fn context_capacity(&self) -> usize {
        self.capacity
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_chunk(&self, tokens: &[usize], mask: &[u8]) -> Result<Vec<Vec<f64>>> {
        if tokens.len() != mask.len() {
            return Err(Error::Shape(format!("{} tokens but {} mask entries", tokens.len(), mask.len())));
        }
        Ok(self.table_rows(tokens))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    pub auth_token: Option<String>,
    pub timeout: Duration,
    pub context_capacity: usize,
    pub dim: usize,
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
    /// Falls back to `$LOGTRIAGE_CACHE_DIR`; no caching when both are unset.
    pub cache_dir: Option<PathBuf>,
}

impl HttpProviderConfig {
    pub fn new(endpoint: impl Into<String>, context_capacity: usize, dim: usize) -> Self {
        HttpProviderConfig {
            endpoint: endpoint.into(),
            auth_token: None,
            timeout: Duration::from_secs(60),
            context_capacity,
            dim,
            attempts: 3,
            backoff: Duration::from_millis(500),
            cache_dir: None,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [usize],
    mask: &'a [u8],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

/// Client of a JSON embedding service:
/// `POST {"tokens": [..], "mask": [..]}` → `{"embeddings": [[..], ..]}`.
/// Requests are sent one at a time.
pub struct HttpProvider {
    cfg: HttpProviderConfig,
    agent: ureq::Agent,
    cache_dir: Option<PathBuf>,
}

enum Attempt {
    Retry(String),
    Fatal(String),
}

impl HttpProvider {
    pub fn new(cfg: HttpProviderConfig) -> Result<Self> {
        if cfg.attempts == 0 || cfg.dim == 0 || cfg.context_capacity == 0 {
            return Err(Error::Config("http provider needs positive attempts, dim and context capacity".into()));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let cache_dir = cfg
            .cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from));
        Ok(HttpProvider { cfg, agent, cache_dir })
    }

    fn cache_path(&self, body: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut h = Sha256::new();
        h.update(self.cfg.endpoint.as_bytes());
        h.update(b"\n");
        h.update(body.as_bytes());
        Some(dir.join(format!("{}.json", hex::encode(h.finalize()))))
    }

    fn post_once(&self, body: &str) -> std::result::Result<String, Attempt> {
        let mut req = self.agent.post(&self.cfg.endpoint).header("Content-Type", "application/json");
        if let Some(token) = &self.cfg.auth_token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}"))),
            _ => Err(Attempt::Fatal(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()))),
        }
    }

    fn post(&self, body: &str) -> std::result::Result<String, String> {
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..self.cfg.attempts {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.post_once(body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(reason)) => return Err(reason),
                Err(Attempt::Retry(reason)) => {
                    log::warn!("embedding request attempt {} failed: {reason}", attempt + 1);
                    last = reason;
                }
            }
        }
        Err(format!("{} attempts failed, last error: {last}", self.cfg.attempts))
    }

    fn parse(&self, text: &str, n_tokens: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
        let resp: EmbedResponse = serde_json::from_str(text).map_err(|e| format!("malformed response: {e}"))?;
        if resp.embeddings.len() != n_tokens || resp.embeddings.iter().any(|r| r.len() != self.cfg.dim) {
            return Err(format!(
                "response shape mismatch: expected {n_tokens} rows of dimension {}",
                self.cfg.dim
            ));
        }
        Ok(resp.embeddings)
    }
}

fn write_cache(path: &Path, text: &str) {
    let result = path
        .parent()
        .map_or(Ok(()), std::fs::create_dir_all)
        .and_then(|_| std::fs::write(path, text));
    if let Err(e) = result {
        log::warn!("could not write embedding cache {}: {e}", path.display());
    }
}

impl EmbeddingProvider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.cfg.endpoint)
    }

    fn context_capacity(&self) -> usize {
        self.cfg.context_capacity
    }

    fn dim(&self) -> usize {
        self.cfg.dim
    }

    /// Errors carry chunk index 0; `embed_document` fills in the real one.
    fn embed_chunk(&self, tokens: &[usize], mask: &[u8]) -> Result<Vec<Vec<f64>>> {
        let fail = |reason: String| Error::Provider { chunk: 0, reason };
        let body = serde_json::to_string(&EmbedRequest { tokens, mask })?;
        let cache = self.cache_path(&body);
        if let Some(path) = &cache {
            if let Ok(text) = std::fs::read_to_string(path) {
                if let Ok(rows) = self.parse(&text, tokens.len()) {
                    return Ok(rows);
                }
                log::warn!("ignoring unreadable cache entry {}", path.display());
            }
        }
        let text = self.post(&body).map_err(fail)?;
        let rows = self.parse(&text, tokens.len()).map_err(fail)?;
        if let Some(path) = &cache {
            write_cache(path, &text);
        }
        Ok(rows)
    }
}
