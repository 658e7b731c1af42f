use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::MemoryError;

/// Unit-length embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    /// Scales to unit L2 norm; an all-zero vector is left as is.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity of two unit vectors, clamped to [-1, 1].
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let dot: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        dot.clamp(-1.0, 1.0)
    }
}

pub trait EmbeddingBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Embeds each text; the output has one vector per input, all of equal length.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, MemoryError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, MemoryError> {
        let mut v = self.embed_batch(&[text.to_string()])?;
        v.pop().ok_or_else(|| MemoryError::BackendUnavailable("empty embedding response".into()))
    }
}

/// Offline backend: character 3-gram feature hashing (FNV-1a) into `dim`
/// buckets, then L2 normalization. Text is lower-cased and whitespace runs
/// collapse to one space.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 256 }
    }
}

fn fnv1a(chars: &[char]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 4];
    for c in chars {
        for b in c.encode_utf8(&mut buf).bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, MemoryError> {
        let normalized: Vec<char> = text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase()
            .chars()
            .collect();
        if normalized.is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let mut counts = vec![0.0f64; self.dim];
        if normalized.len() < 3 {
            counts[(fnv1a(&normalized) % self.dim as u64) as usize] += 1.0;
        } else {
            for gram in normalized.windows(3) {
                counts[(fnv1a(gram) % self.dim as u64) as usize] += 1.0;
            }
        }
        Ok(EmbeddingVector::normalized(counts))
    }
}

impl EmbeddingBackend for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing-3gram"
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, MemoryError> {
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}

/// Client for an HTTP JSON embeddings API (`{"model", "input": [...]}` in,
/// `{"data": [{"index", "embedding"}]}` out). The bearer token comes from
/// `EMBED_API_KEY`.
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: usize,
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: impl Into<String>) -> Result<Self, MemoryError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| MemoryError::BackendUnavailable(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            client,
        })
    }

    /// Reads the token from `EMBED_API_KEY`.
    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> Result<Self, MemoryError> {
        let key = std::env::var("EMBED_API_KEY")
            .map_err(|_| MemoryError::BackendUnavailable("EMBED_API_KEY is not set".into()))?;
        Self::new(endpoint, model, key)
    }
}

impl EmbeddingBackend for HttpEmbedder {
    fn name(&self) -> &str {
        &self.model
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, MemoryError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(MemoryError::EmptyText);
        }
        let body = serde_json::json!({"model": self.model, "input": texts});
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| MemoryError::BackendUnavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(MemoryError::BackendUnavailable(format!("embedding API returned {}", resp.status())));
        }
        let mut parsed: EmbeddingResponse = resp
            .json()
            .map_err(|e| MemoryError::BackendUnavailable(format!("bad embedding response: {e}")))?;
        if parsed.data.len() != texts.len() {
            return Err(MemoryError::BackendUnavailable(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        parsed.data.sort_by_key(|d| d.index);
        let dim = parsed.data[0].embedding.len();
        if parsed.data.iter().any(|d| d.embedding.len() != dim) {
            return Err(MemoryError::DimensionMismatch {
                expected: dim,
                got: parsed.data.iter().map(|d| d.embedding.len()).find(|l| *l != dim).unwrap_or(0),
            });
        }
        Ok(parsed
            .data
            .into_iter()
            .map(|d| EmbeddingVector::normalized(d.embedding))
            .collect())
    }
}
