//! Paragraph embeddings, an exact-scan vector index, and top-k cosine
//! retrieval.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::{char_slice, tokenize, Corpus};
use crate::hash::{fnv1a64, fnv1a64_seeded};

pub const DEFAULT_DIMENSION: usize = 256;

/// Basis for the sign hash, distinct from the bucket hash basis.
const SIGN_BASIS: u64 = 0x9e37_79b9_7f4a_7c15;

/// Fixed-length vector; unit L2 norm unless all zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        Self { values: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| f64::from(*v) * f64::from(*v)).sum())
    }

    /// Cosine similarity; 0 when either side is the zero vector.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let na = self.norm();
        let nb = other.norm();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f64::from(*a) * f64::from(*b))
            .sum();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Pluggable text embedder.
pub trait Embedder {
    /// Versioned identifier stored with every index built by this embedder.
    fn embedder_id(&self) -> String;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> EmbeddingVector;
}

/// Signed feature hashing of lower-cased unigrams and adjacent bigrams,
/// term-frequency weighted and L2-normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        Self { dimension }
    }

    fn terms(text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        tokenize(&lowered)
            .into_iter()
            .filter_map(|s| char_slice(&lowered, s))
            .filter(|t| t.chars().any(char::is_alphanumeric))
            .map(str::to_string)
            .collect()
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_DIMENSION)
    }
}

impl Embedder for HashingEmbedder {
    fn embedder_id(&self) -> String {
        format!("hash-tf-bigram-v1-d{}", self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let terms = Self::terms(text);
        let mut acc = vec![0.0f64; self.dimension];
        let mut add = |feature: &str| {
            let bucket = (fnv1a64(feature.as_bytes()) % self.dimension as u64) as usize;
            let sign = if fnv1a64_seeded(SIGN_BASIS, feature.as_bytes()) >> 63 == 0 { 1.0 } else { -1.0 };
            acc[bucket] += sign;
        };
        for t in &terms {
            add(&format!("u:{t}"));
        }
        for w in terms.windows(2) {
            add(&format!("b:{} {}", w[0], w[1]));
        }
        let norm = libm::sqrt(acc.iter().map(|v| v * v).sum());
        let values = if norm > 0.0 {
            acc.iter().map(|v| (v / norm) as f32).collect()
        } else {
            vec![0.0; self.dimension]
        };
        EmbeddingVector { values }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("embedder mismatch: index uses {index}, got {other}")]
    EmbedderMismatch { index: String, other: String },
    #[error("dimension mismatch: index has {index}, got {other}")]
    DimensionMismatch { index: usize, other: usize },
    #[error("k must be at least 1")]
    ZeroK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub embedder_id: String,
    pub dimension: usize,
    pub entries: BTreeMap<String, EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub para_id: String,
    pub score: f64,
}

impl VectorIndex {
    pub fn new(embedder_id: impl Into<String>, dimension: usize) -> Self {
        Self {
            embedder_id: embedder_id.into(),
            dimension,
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, para_id: impl Into<String>, vector: EmbeddingVector) -> Result<(), IndexError> {
        if vector.dim() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                index: self.dimension,
                other: vector.dim(),
            });
        }
        self.entries.insert(para_id.into(), vector);
        Ok(())
    }

    /// Adds every entry of `other`; both indexes must share embedder and
    /// dimension.
    pub fn merge(&mut self, other: VectorIndex) -> Result<(), IndexError> {
        if other.embedder_id != self.embedder_id {
            return Err(IndexError::EmbedderMismatch {
                index: self.embedder_id.clone(),
                other: other.embedder_id,
            });
        }
        if other.dimension != self.dimension {
            return Err(IndexError::DimensionMismatch {
                index: self.dimension,
                other: other.dimension,
            });
        }
        self.entries.extend(other.entries);
        Ok(())
    }

    /// Exact scan: highest cosine first, ties by ascending paragraph id.
    pub fn top_k(&self, embedder: &dyn Embedder, query: &str, k: usize) -> Result<Vec<RetrievalHit>, IndexError> {
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        if embedder.embedder_id() != self.embedder_id {
            return Err(IndexError::EmbedderMismatch {
                index: self.embedder_id.clone(),
                other: embedder.embedder_id(),
            });
        }
        let q = embedder.embed(query);
        let mut hits: Vec<RetrievalHit> = self
            .entries
            .iter()
            .map(|(id, v)| RetrievalHit {
                para_id: id.clone(),
                score: q.cosine(v),
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.para_id.cmp(&b.para_id))
        });
        hits.truncate(k);
        Ok(hits)
    }
}

/// One entry per paragraph of `corpus`.
pub fn index_paragraphs(corpus: &Corpus, embedder: &dyn Embedder) -> VectorIndex {
    let mut index = VectorIndex::new(embedder.embedder_id(), embedder.dimension());
    for p in corpus.paragraphs() {
        index.entries.insert(p.para_id.clone(), embedder.embed(&p.text));
    }
    index
}
