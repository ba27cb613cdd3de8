//! Text embeddings and cosine similarity.
//!
//! The default [`LexicalEmbedder`] hashes character trigrams into a fixed
//! number of signed buckets (FNV-1a, 64 bit) and L2-normalizes the result.
//! It is deterministic and needs no model files. [`ServiceEmbedder`] asks an
//! external HTTP service for vectors instead.

use std::collections::HashMap;
use std::ops::Neg;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{clamp, Real};

pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("text is empty")]
    EmptyText,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("text produced a zero vector")]
    ZeroVector,
    #[error("embedding service: {0}")]
    Service(String),
    #[error("embedder configuration: {0}")]
    Config(String),
}

/// A unit-length vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding<T> {
    values: Vec<T>,
}

impl<T: Real> Embedding<T> {
    /// Normalizes `values` to unit length.
    pub fn normalized(values: Vec<T>) -> Result<Self, EmbedError> {
        let norm = values.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
        if norm == T::zero() || !norm.is_finite() {
            return Err(EmbedError::ZeroVector);
        }
        Ok(Embedding {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc + *v * *v)
            .sqrt()
    }
}

impl<T: Real> Neg for Embedding<T> {
    type Output = Embedding<T>;

    fn neg(self) -> Self::Output {
        Embedding {
            values: self.values.into_iter().map(|v| -v).collect(),
        }
    }
}

/// Cosine of two unit vectors, clamped into `[-1, 1]`.
pub fn cosine<T: Real>(a: &Embedding<T>, b: &Embedding<T>) -> Result<T, EmbedError> {
    if a.dimension() != b.dimension() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let dot = a
        .values
        .iter()
        .zip(&b.values)
        .fold(T::zero(), |acc, (x, y)| acc + *x * *y);
    Ok(clamp(dot, -T::one(), T::one()))
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME)
    })
}

/// Lowercased tokens, split on non-alphanumerics and camelCase boundaries.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut prev: Option<char> = None;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            let boundary =
                ch.is_uppercase() && prev.is_some_and(|p| p.is_lowercase() || p.is_numeric());
            if boundary && !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            current.push(ch);
            prev = Some(ch);
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            prev = None;
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out.into_iter().map(|t| t.to_lowercase()).collect()
}

/// Hashed character-trigram embedding of `text`.
pub fn lexical_embedding<T: Real>(
    text: &str,
    dimension: usize,
) -> Result<Embedding<T>, EmbedError> {
    if text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    if dimension == 0 {
        return Err(EmbedError::Config("dimension must be positive".into()));
    }
    let mut buckets = vec![T::zero(); dimension];
    for token in tokens(text) {
        let padded: Vec<char> = std::iter::once('^')
            .chain(token.chars())
            .chain(std::iter::once('$'))
            .collect();
        for gram in padded.windows(3) {
            let gram: String = gram.iter().collect();
            let h = fnv1a(gram.as_bytes());
            let bucket = (h % dimension as u64) as usize;
            if h >> 63 == 0 {
                buckets[bucket] = buckets[bucket] + T::one();
            } else {
                buckets[bucket] = buckets[bucket] - T::one();
            }
        }
    }
    Embedding::normalized(buckets)
}

pub type EmbeddingVector = Embedding<f64>;

/// A source of embeddings.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct LexicalEmbedder {
    dimension: usize,
}

impl LexicalEmbedder {
    pub fn new(dimension: usize) -> Self {
        LexicalEmbedder { dimension }
    }
}

impl Default for LexicalEmbedder {
    fn default() -> Self {
        LexicalEmbedder::new(DEFAULT_DIMENSION)
    }
}

impl Embedder for LexicalEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        lexical_embedding(text, self.dimension)
    }
}

#[derive(Serialize)]
struct ServiceRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct ServiceResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an embedding service speaking
/// `POST {"texts": [...]}` → `{"vectors": [[...], ...]}`.
pub struct ServiceEmbedder {
    endpoint: String,
    dimension: usize,
    retries: u32,
    agent: ureq::Agent,
}

impl ServiceEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        dimension: usize,
        timeout: Duration,
        retries: u32,
    ) -> Self {
        ServiceEmbedder {
            endpoint: endpoint.into(),
            dimension,
            retries,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    fn request(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut last = String::new();
        for _ in 0..=self.retries {
            match self
                .agent
                .post(&self.endpoint)
                .send_json(ServiceRequest { texts })
            {
                Ok(resp) => {
                    let body: ServiceResponse = resp
                        .into_json()
                        .map_err(|e| EmbedError::Service(format!("bad response body: {e}")))?;
                    return Ok(body.vectors);
                }
                // client errors will not improve on retry
                Err(ureq::Error::Status(code, _)) if code < 500 => {
                    return Err(EmbedError::Service(format!("status {code}")));
                }
                Err(e) => last = e.to_string(),
            }
        }
        Err(EmbedError::Service(last))
    }
}

impl Embedder for ServiceEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let vectors = self.request(texts)?;
        if vectors.len() != texts.len() {
            return Err(EmbedError::Service(format!(
                "expected {} vectors, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dimension {
                    return Err(EmbedError::DimensionMismatch {
                        left: self.dimension,
                        right: v.len(),
                    });
                }
                Embedding::normalized(v)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    #[default]
    LexicalDefault,
    ExternalService,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderConfig {
    pub provider: Provider,
    pub dimension: usize,
    pub service_endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        EmbedderConfig {
            provider: Provider::LexicalDefault,
            dimension: DEFAULT_DIMENSION,
            service_endpoint: None,
            timeout_ms: 5_000,
            retries: 2,
        }
    }
}

impl EmbedderConfig {
    pub fn build(&self) -> Result<Arc<dyn Embedder>, EmbedError> {
        if self.dimension == 0 {
            return Err(EmbedError::Config("dimension must be positive".into()));
        }
        match self.provider {
            Provider::LexicalDefault => Ok(Arc::new(LexicalEmbedder::new(self.dimension))),
            Provider::ExternalService => {
                let endpoint = self.service_endpoint.clone().ok_or_else(|| {
                    EmbedError::Config("external_service requires service_endpoint".into())
                })?;
                Ok(Arc::new(ServiceEmbedder::new(
                    endpoint,
                    self.dimension,
                    Duration::from_millis(self.timeout_ms),
                    self.retries,
                )))
            }
        }
    }
}

/// Memoizing similarity oracle shared by everything that compares texts.
///
/// Vectors are cached per text and similarities per unordered text pair.
/// Reads proceed concurrently; inserts take a write lock.
pub struct SemanticSpace {
    embedder: Arc<dyn Embedder>,
    vectors: RwLock<HashMap<String, Arc<EmbeddingVector>>>,
    pairs: RwLock<HashMap<(String, String), f64>>,
}

impl SemanticSpace {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        SemanticSpace {
            embedder,
            vectors: RwLock::new(HashMap::new()),
            pairs: RwLock::new(HashMap::new()),
        }
    }

    pub fn lexical() -> Self {
        SemanticSpace::new(Arc::new(LexicalEmbedder::default()))
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn embed(&self, text: &str) -> Result<Arc<EmbeddingVector>, EmbedError> {
        if let Some(v) = self.vectors.read().expect("cache lock").get(text) {
            return Ok(Arc::clone(v));
        }
        let v = Arc::new(self.embedder.embed(text)?);
        self.vectors
            .write()
            .expect("cache lock")
            .entry(text.to_string())
            .or_insert_with(|| Arc::clone(&v));
        Ok(v)
    }

    /// Embeds many texts in one round trip where the provider supports it.
    pub fn prefetch<'t>(&self, texts: impl IntoIterator<Item = &'t str>) -> Result<(), EmbedError> {
        let missing: Vec<&str> = {
            let cache = self.vectors.read().expect("cache lock");
            let mut seen = std::collections::BTreeSet::new();
            texts
                .into_iter()
                .filter(|t| !cache.contains_key(*t) && seen.insert(*t))
                .collect()
        };
        if missing.is_empty() {
            return Ok(());
        }
        let vectors = self.embedder.embed_batch(&missing)?;
        let mut cache = self.vectors.write().expect("cache lock");
        for (t, v) in missing.into_iter().zip(vectors) {
            cache.entry(t.to_string()).or_insert_with(|| Arc::new(v));
        }
        Ok(())
    }

    /// Cosine similarity of two texts, memoized.
    pub fn text_similarity(&self, a: &str, b: &str) -> Result<f64, EmbedError> {
        let key = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        if let Some(s) = self.pairs.read().expect("cache lock").get(&key) {
            return Ok(*s);
        }
        let s = self.uncached_similarity(&key.0, &key.1)?;
        self.pairs.write().expect("cache lock").insert(key, s);
        Ok(s)
    }

    /// Same value as [`text_similarity`](Self::text_similarity) without the
    /// pair cache.
    pub fn uncached_similarity(&self, a: &str, b: &str) -> Result<f64, EmbedError> {
        // fixed argument order keeps the float result independent of call order
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        cosine(&*self.embed(a)?, &*self.embed(b)?)
    }
}

impl std::fmt::Debug for SemanticSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemanticSpace")
            .field("dimension", &self.embedder.dimension())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_camel_case_and_punctuation() {
        assert_eq!(tokens("orderQuantity"), vec!["order", "quantity"]);
        assert_eq!(tokens("order_quantity"), vec!["order", "quantity"]);
        assert_eq!(tokens("HTTP2Server id"), vec!["http2", "server", "id"]);
        assert!(tokens("--").is_empty());
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64-bit test vectors
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_and_symbol_only_text() {
        assert_eq!(
            lexical_embedding::<f64>("", 256),
            Err(EmbedError::EmptyText)
        );
        assert_eq!(
            lexical_embedding::<f64>("   ", 256),
            Err(EmbedError::EmptyText)
        );
        assert_eq!(
            lexical_embedding::<f64>("!!", 256),
            Err(EmbedError::ZeroVector)
        );
    }

    #[test]
    fn unit_norm_in_both_precisions() {
        let v64 = lexical_embedding::<f64>("order quantity", 256).unwrap();
        assert!((v64.norm() - 1.0).abs() < 1e-9);
        assert_eq!(v64.dimension(), 256);
        let v32 = lexical_embedding::<f32>("order quantity", 256).unwrap();
        assert!((v32.norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn cosine_extremes() {
        let v = lexical_embedding::<f64>("order quantity", 256).unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &-v.clone()).unwrap() + 1.0).abs() < 1e-12);
        let w = lexical_embedding::<f64>("order quantity", 64).unwrap();
        assert_eq!(
            cosine(&v, &w),
            Err(EmbedError::DimensionMismatch {
                left: 256,
                right: 64
            })
        );
    }

    #[test]
    fn external_provider_requires_endpoint() {
        let cfg = EmbedderConfig {
            provider: Provider::ExternalService,
            ..EmbedderConfig::default()
        };
        assert!(matches!(cfg.build(), Err(EmbedError::Config(_))));
    }
}
