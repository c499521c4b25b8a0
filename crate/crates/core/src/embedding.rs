//! Sentence embeddings behind a pluggable [`Embedder`] interface.
//!
//! The built-in [`NgramHashEmbedder`] hashes lowercase character n-grams
//! into a fixed number of buckets and L2-normalizes the counts. It is
//! seedless and platform independent, so its vectors can be frozen in model
//! files and golden tests. Vectors from external encoders can be brought in
//! through model files (see [`load_precomputed`]).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model_store::{self, FormatError};

pub const DEFAULT_DIMENSION: usize = 512;
pub const BASELINE_ID: &str = "baseline-ngram-v1";
const DEFAULT_NGRAM: usize = 3;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("unknown embedder `{0}`")]
    UnknownEmbedder(String),
    #[error("invalid parameter `{key}` for embedder `{id}`: {reason}")]
    InvalidParam {
        id: String,
        key: String,
        reason: String,
    },
    #[error("dimension must be positive")]
    ZeroDimension,
}

/// Identity of an embedder. `id` and `params` fully determine its output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub id: String,
    pub dimension: usize,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

impl EmbedderSpec {
    pub fn new(id: impl Into<String>, dimension: usize) -> Self {
        EmbedderSpec {
            id: id.into(),
            dimension,
            params: BTreeMap::new(),
        }
    }

    pub fn baseline(dimension: usize) -> Self {
        let mut spec = Self::new(BASELINE_ID, dimension);
        spec.params.insert("n".into(), DEFAULT_NGRAM.to_string());
        spec
    }
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self::baseline(DEFAULT_DIMENSION)
    }
}

/// A dense `f32` vector. Produced embeddings are unit length, or all zeros
/// for blank input (the null embedding).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> Self {
        EmbeddingVector(values)
    }

    pub fn null(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_null(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }
}

/// Row-major `[n, dimension]` matrix, one row per knowledge-base question.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dimension: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dimension: usize) -> Self {
        EmbeddingMatrix {
            dimension,
            data: Vec::new(),
        }
    }

    /// Builds a matrix from rows; `None` if any row has the wrong length.
    pub fn from_rows<I>(dimension: usize, rows: I) -> Option<Self>
    where
        I: IntoIterator,
        I::Item: AsRef<[f32]>,
    {
        let mut matrix = Self::new(dimension);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dimension {
                return None;
            }
            matrix.data.extend_from_slice(row);
        }
        Some(matrix)
    }

    pub fn push(&mut self, row: &EmbeddingVector) {
        assert_eq!(row.dimension(), self.dimension, "row dimension mismatch");
        self.data.extend_from_slice(row.values());
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dimension).unwrap_or(0)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.dimension)
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dimension.max(1))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

pub trait Embedder: Send + Sync {
    fn spec(&self) -> &EmbedderSpec;

    fn embed(&self, text: &str) -> EmbeddingVector;

    /// Embeds every question; row order follows input order.
    fn embed_batch(&self, questions: &[String]) -> EmbeddingMatrix {
        let rows: Vec<EmbeddingVector> = questions.par_iter().map(|q| self.embed(q)).collect();
        let mut matrix = EmbeddingMatrix::new(self.spec().dimension);
        for row in &rows {
            matrix.push(row);
        }
        matrix
    }
}

/// Hashed character n-gram counts, L2-normalized.
#[derive(Debug, Clone)]
pub struct NgramHashEmbedder {
    spec: EmbedderSpec,
    ngram: usize,
}

impl NgramHashEmbedder {
    pub fn new(spec: EmbedderSpec) -> Result<Self, EmbeddingError> {
        if spec.id != BASELINE_ID {
            return Err(EmbeddingError::UnknownEmbedder(spec.id));
        }
        if spec.dimension == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        let ngram = match spec.params.get("n") {
            None => DEFAULT_NGRAM,
            Some(raw) => raw
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| EmbeddingError::InvalidParam {
                    id: spec.id.clone(),
                    key: "n".into(),
                    reason: format!("expected a positive integer, got `{raw}`"),
                })?,
        };
        Ok(NgramHashEmbedder { spec, ngram })
    }

    /// Bucket counts before normalization.
    pub fn counts(&self, text: &str) -> Vec<u32> {
        let mut counts = vec![0u32; self.spec.dimension];
        let lowered = text.to_lowercase();
        let mut chars: Vec<char> = Vec::with_capacity(lowered.len() + 2);
        for word in lowered.split_whitespace() {
            chars.push(' ');
            chars.extend(word.chars());
        }
        if chars.is_empty() {
            return counts;
        }
        chars.push(' ');
        let mut buf = String::new();
        for gram in chars.windows(self.ngram) {
            buf.clear();
            buf.extend(gram);
            let bucket = fnv1a64(buf.as_bytes()) % self.spec.dimension as u64;
            counts[bucket as usize] += 1;
        }
        counts
    }
}

impl Embedder for NgramHashEmbedder {
    fn spec(&self) -> &EmbedderSpec {
        &self.spec
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        let counts = self.counts(text);
        let norm = counts
            .iter()
            .map(|&c| f64::from(c) * f64::from(c))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return EmbeddingVector::null(self.spec.dimension);
        }
        EmbeddingVector(
            counts
                .iter()
                .map(|&c| (f64::from(c) / norm) as f32)
                .collect(),
        )
    }
}

pub type EmbedderFactory =
    Arc<dyn Fn(&EmbedderSpec) -> Result<Arc<dyn Embedder>, EmbeddingError> + Send + Sync>;

/// Maps embedder ids to constructors.
#[derive(Clone)]
pub struct EmbedderRegistry {
    factories: HashMap<String, EmbedderFactory>,
}

impl std::fmt::Debug for EmbedderRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut ids: Vec<_> = self.factories.keys().collect();
        ids.sort();
        f.debug_struct("EmbedderRegistry").field("ids", &ids).finish()
    }
}

impl Default for EmbedderRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl EmbedderRegistry {
    pub fn empty() -> Self {
        EmbedderRegistry {
            factories: HashMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register(BASELINE_ID, |spec| {
            Ok(Arc::new(NgramHashEmbedder::new(spec.clone())?) as Arc<dyn Embedder>)
        });
        registry
    }

    pub fn register<F>(&mut self, id: impl Into<String>, factory: F)
    where
        F: Fn(&EmbedderSpec) -> Result<Arc<dyn Embedder>, EmbeddingError> + Send + Sync + 'static,
    {
        self.factories.insert(id.into(), Arc::new(factory));
    }

    pub fn contains(&self, id: &str) -> bool {
        self.factories.contains_key(id)
    }

    pub fn build(&self, spec: &EmbedderSpec) -> Result<Arc<dyn Embedder>, EmbeddingError> {
        let factory = self
            .factories
            .get(&spec.id)
            .ok_or_else(|| EmbeddingError::UnknownEmbedder(spec.id.clone()))?;
        factory(spec)
    }
}

/// Embeds one sentence with a built-in embedder.
pub fn embed(text: &str, spec: &EmbedderSpec) -> Result<EmbeddingVector, EmbeddingError> {
    Ok(EmbedderRegistry::with_builtins().build(spec)?.embed(text))
}

pub fn embed_batch(
    questions: &[String],
    spec: &EmbedderSpec,
) -> Result<EmbeddingMatrix, EmbeddingError> {
    Ok(EmbedderRegistry::with_builtins()
        .build(spec)?
        .embed_batch(questions))
}

/// Reads the embedder identity and matrix from a model file without
/// running any embedder.
pub fn load_precomputed(path: &Path) -> Result<(EmbedderSpec, EmbeddingMatrix), FormatError> {
    let kb = model_store::load_model(path)?;
    Ok((kb.embedder().clone(), kb.matrix().clone()))
}
