use unicode_normalization::UnicodeNormalization;

use super::{Embedder, EmbeddingError, EmbeddingVector};

pub const DEFAULT_DIMENSION: usize = 512;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Lowercase, NFC, single spaces, trimmed.
pub fn normalize_text(text: &str) -> String {
    let lowered: String = text.to_lowercase().nfc().collect();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Signed character-trigram hashing into `dimension` buckets, L2-normalized.
///
/// The text is normalized with [`normalize_text`] and padded with one `#`
/// on each side. Every trigram of chars is hashed (FNV-1a, 64-bit, over its
/// UTF-8 bytes); bucket `hash % dimension` moves by +1 when the top bit of
/// the hash is clear and by -1 when it is set.
pub fn embed_deterministic(text: &str, dimension: usize) -> Result<EmbeddingVector, EmbeddingError> {
    if dimension == 0 {
        return Err(EmbeddingError::Dimension { left: 0, right: 0 });
    }
    let normalized = normalize_text(text);
    if normalized.is_empty() {
        return Err(EmbeddingError::EmptyText);
    }
    let mut chars: Vec<char> = Vec::with_capacity(normalized.len() + 2);
    chars.push('#');
    chars.extend(normalized.chars());
    chars.push('#');

    let mut buckets = vec![0.0f64; dimension];
    let mut buf = [0u8; 12];
    for window in chars.windows(3) {
        let mut len = 0;
        for c in window {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let hash = fnv1a(&buf[..len]);
        let bucket = (hash % dimension as u64) as usize;
        if hash >> 63 == 0 {
            buckets[bucket] += 1.0;
        } else {
            buckets[bucket] -= 1.0;
        }
    }

    let norm = buckets.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Opposite-signed trigrams cancelled in every bucket they touched.
        return Err(EmbeddingError::ZeroVector);
    }
    for c in &mut buckets {
        *c /= norm;
    }
    EmbeddingVector::new(buckets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl TrigramEmbedder {
    pub fn new(dimension: usize) -> Self {
        TrigramEmbedder { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder::new(DEFAULT_DIMENSION)
    }
}

impl Embedder for TrigramEmbedder {
    fn id(&self) -> String {
        format!("trigram-fnv1a-{}", self.dimension)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| embed_deterministic(t, self.dimension)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine_similarity;
    use proptest::prelude::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  De\tMANERA \n\n limitada "), "de manera limitada");
        assert_eq!(normalize_text("Nin\u{303}o"), "niño");
        assert_eq!(normalize_text(" \t\n"), "");
    }

    #[test]
    fn empty_text_rejected() {
        assert_eq!(embed_deterministic("   ", 512), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn self_similarity_and_norm() {
        let a = embed_deterministic("casa", 512).unwrap();
        let b = embed_deterministic("casa", 512).unwrap();
        assert_eq!(a, b);
        assert_eq!(cosine_similarity(&a, &b).unwrap().value(), 1.0);
        assert!((a.norm() - 1.0).abs() < 1e-9);
        assert_eq!(a.dimension(), 512);
    }

    #[test]
    fn paraphrase_beats_unrelated() {
        let a = embed_deterministic("de manera limitada", 512).unwrap();
        let b = embed_deterministic("de forma limitada", 512).unwrap();
        let c = embed_deterministic("estrofa de cuatro versos", 512).unwrap();
        let near = cosine_similarity(&a, &b).unwrap().value();
        let far = cosine_similarity(&a, &c).unwrap().value();
        assert!(near > far, "{near} vs {far}");
    }

    #[test]
    fn normalization_invariance() {
        let a = embed_deterministic("  Acción   y efecto ", 64).unwrap();
        let b = embed_deterministic("acción y efecto", 64).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn unit_norm(text in "[a-zñáéíóú ]{1,40}", dim in 1usize..600) {
            match embed_deterministic(&text, dim) {
                Ok(v) => {
                    prop_assert_eq!(v.dimension(), dim);
                    prop_assert!((v.norm() - 1.0).abs() <= 1e-9);
                }
                Err(EmbeddingError::EmptyText) => prop_assert!(text.trim().is_empty()),
                Err(EmbeddingError::ZeroVector) => {}
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }
}
