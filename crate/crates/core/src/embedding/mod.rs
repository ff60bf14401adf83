//! Text embeddings and cosine similarity.
//!
//! Two embedders implement [`Embedder`]: the offline [`TrigramEmbedder`]
//! (signed character-trigram hashing, bit-reproducible) and
//! [`RemoteEmbedder`], a client for an external sentence-encoder service.
//! [`CachedEmbedder`] puts a persistent cache in front of either.

mod cache;
mod deterministic;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{default_cache_path, CachedEmbedder, EmbeddingCache};
pub use deterministic::{embed_deterministic, normalize_text, TrigramEmbedder, DEFAULT_DIMENSION};
pub use remote::{RemoteEmbedder, RemoteEmbedderConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("embedding service unavailable: {0}")]
    Service(String),
    #[error("embedding service protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.is_empty() {
            return Err(EmbeddingError::Dimension { left: 0, right: 0 });
        }
        Ok(EmbeddingVector(components))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> EmbeddingVector {
        EmbeddingVector(self.0.iter().map(|c| c * factor).collect())
    }

    /// Little-endian IEEE-754 bytes of every component.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|c| c.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.is_empty() || !bytes.len().is_multiple_of(8) {
            return None;
        }
        let components = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Some(EmbeddingVector(components))
    }
}

/// Cosine similarity, clamped to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub fn new(value: f64) -> Self {
        SimilarityScore(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<SimilarityScore, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::Dimension {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(SimilarityScore::new(dot / (a.norm() * b.norm())))
}

/// Something that turns texts into vectors. Implementations are shared
/// across threads.
pub trait Embedder: Send + Sync {
    /// Stable identifier, recorded in reports and used as cache namespace.
    fn id(&self) -> String;

    /// One vector per input, in input order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut vectors = self.embed_batch(&[text])?;
        vectors
            .pop()
            .ok_or_else(|| EmbeddingError::Protocol("embedder returned no vector".into()))
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn id(&self) -> String {
        (**self).id()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed_batch(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for Box<E> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        (**self).embed_batch(texts)
    }
}
