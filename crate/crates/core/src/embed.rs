//! Text embeddings and an exact in-memory vector index.
//!
//! Two providers are built in: a deterministic hashed bag-of-words embedder
//! used by default and in tests, and an HTTP provider speaking the common
//! `POST /embeddings {model, input}` shape. The index is a linear scan; the
//! corpora this serves are small enough that exact answers are cheap.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("vector contains non-finite values")]
    NonFinite,
    #[error("vector index is empty")]
    EmptyIndex,
    #[error("duplicate key `{0}` in vector index")]
    DuplicateKey(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

/// A finite-valued embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::InvalidArgument("embedding must have dim >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_dims(u: &Embedding, v: &Embedding) -> Result<(), EmbedError> {
    if u.dim() != v.dim() {
        return Err(EmbedError::DimMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(())
}

/// `dot(u, v) / (|u| |v|)`, clamped into [-1, 1] against rounding.
pub fn cosine_similarity(u: &Embedding, v: &Embedding) -> Result<f64, EmbedError> {
    check_dims(u, v)?;
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbedError::ZeroVector);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub fn euclidean_distance(u: &Embedding, v: &Embedding) -> Result<f64, EmbedError> {
    check_dims(u, v)?;
    Ok(u.0
        .iter()
        .zip(&v.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Anything that can turn text into a fixed-dimension vector.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, EmbedError>;
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic hashed bag-of-words: each token is hashed (FNV-1a) into one
/// of `dim` buckets, buckets are counted, and the result is L2-normalized.
#[derive(Debug, Clone, Copy)]
pub struct HashedBagOfWords {
    dim: usize,
}

impl HashedBagOfWords {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::InvalidArgument("dim must be positive"));
        }
        Ok(HashedBagOfWords { dim })
    }
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        HashedBagOfWords {
            dim: Self::DEFAULT_DIM,
        }
    }
}

impl Embedder for HashedBagOfWords {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut counts = vec![0.0; self.dim];
        let mut any = false;
        for token in tokenize(text) {
            let bucket = (fnv1a64(token.as_bytes()) % self.dim as u64) as usize;
            counts[bucket] += 1.0;
            any = true;
        }
        if !any {
            return Err(EmbedError::EmptyText);
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        counts.iter_mut().for_each(|c| *c /= norm);
        Embedding::new(counts)
    }
}

/// Hosted embedding endpoint (`POST {endpoint} {"model", "input"}` →
/// `{"data": [{"embedding": [...]}]}`). Output is passed through unnormalized.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        dim: usize,
        timeout: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            dim,
            agent,
        }
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "model": self.model, "input": text });
        let mut resp = req
            .send_json(&body)
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::ProviderUnavailable(e.to_string()))?;
        let values: Vec<f64> = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| EmbedError::ProviderUnavailable("response lacks data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or(EmbedError::NonFinite))
            .collect::<Result<_, _>>()?;
        let emb = Embedding::new(values)?;
        if emb.dim() != self.dim {
            return Err(EmbedError::DimMismatch {
                expected: self.dim,
                found: emb.dim(),
            });
        }
        Ok(emb)
    }
}

/// Provider configuration block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    pub dim: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Fallback,
    Http,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            provider: ProviderKind::Fallback,
            dim: HashedBagOfWords::DEFAULT_DIM,
            endpoint: None,
            model: None,
            api_key_env: None,
            timeout_secs: 30,
        }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Arc<dyn Embedder>, EmbedError> {
        match self.provider {
            ProviderKind::Fallback => Ok(Arc::new(HashedBagOfWords::new(self.dim)?)),
            ProviderKind::Http => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| EmbedError::ProviderUnavailable("http provider needs an endpoint".into()))?;
                let api_key = self.api_key_env.as_deref().and_then(|k| std::env::var(k).ok());
                Ok(Arc::new(HttpEmbedder::new(
                    endpoint,
                    self.model.clone().unwrap_or_default(),
                    api_key,
                    self.dim,
                    Duration::from_secs(self.timeout_secs),
                )))
            }
        }
    }
}

/// Exact vector index keyed by string identifiers.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dim: usize,
    entries: Vec<(String, Embedding)>,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::InvalidArgument("dim must be positive"));
        }
        Ok(VectorIndex {
            dim,
            entries: Vec::new(),
        })
    }

    /// Embeds every `(key, text)` pair with `embedder`.
    pub fn build<'a>(
        embedder: &dyn Embedder,
        items: impl IntoIterator<Item = (&'a str, String)>,
    ) -> Result<Self, EmbedError> {
        let mut index = VectorIndex::new(embedder.dim())?;
        for (key, text) in items {
            index.insert(key, embedder.embed(&text)?)?;
        }
        Ok(index)
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Embedding) -> Result<(), EmbedError> {
        let key = key.into();
        if vector.dim() != self.dim {
            return Err(EmbedError::DimMismatch {
                expected: self.dim,
                found: vector.dim(),
            });
        }
        if self.entries.iter().any(|(k, _)| *k == key) {
            return Err(EmbedError::DuplicateKey(key));
        }
        self.entries.push((key, vector));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Embedding> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Top-`k` keys by descending cosine similarity; ties go to the smaller key.
    pub fn nearest(&self, query: &Embedding, k: usize) -> Result<Vec<(String, f64)>, EmbedError> {
        if k == 0 {
            return Err(EmbedError::InvalidArgument("k must be >= 1"));
        }
        if self.entries.is_empty() {
            return Err(EmbedError::EmptyIndex);
        }
        let mut scored = self
            .entries
            .iter()
            .map(|(key, v)| Ok((key.clone(), cosine_similarity(query, v)?)))
            .collect::<Result<Vec<_>, EmbedError>>()?;
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        Ok(scored)
    }

    /// Up to `k` keys with Euclidean distance strictly below `threshold`,
    /// closest first; ties go to the smaller key.
    pub fn within_distance(
        &self,
        query: &Embedding,
        threshold: f64,
        k: usize,
    ) -> Result<Vec<(String, f64)>, EmbedError> {
        if !(threshold > 0.0) {
            return Err(EmbedError::InvalidArgument("threshold must be positive"));
        }
        if k == 0 {
            return Err(EmbedError::InvalidArgument("k must be >= 1"));
        }
        if self.entries.is_empty() {
            return Err(EmbedError::EmptyIndex);
        }
        let mut hits = Vec::new();
        for (key, v) in &self.entries {
            let d = euclidean_distance(query, v)?;
            if d < threshold {
                hits.push((key.clone(), d));
            }
        }
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(k);
        Ok(hits)
    }
}
