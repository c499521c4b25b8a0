//! Cosine-similarity question matching with a confidence threshold.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::embedding::{
    Embedder, EmbedderRegistry, EmbedderSpec, EmbeddingError, EmbeddingMatrix, EmbeddingVector,
};
use crate::faq_parser::QaPair;

pub const DEFAULT_THRESHOLD: f64 = 0.75;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MatchError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("knowledge base is empty")]
    EmptyKnowledgeBase,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("embedder `{embedder}` produces {embedder_dim}-d vectors but the knowledge base holds {kb_dim}-d rows")]
    EmbedderMismatch {
        embedder: String,
        embedder_dim: usize,
        kb_dim: usize,
    },
    #[error("invalid knowledge base: {0}")]
    Invalid(String),
}

/// `x·y / (‖x‖‖y‖)`, accumulated in `f64`. Zero when either side is null.
pub fn cosine(x: &[f32], y: &[f32]) -> Result<f64, MatchError> {
    if x.len() != y.len() {
        return Err(MatchError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let mut dot = 0.0f64;
    let mut xx = 0.0f64;
    let mut yy = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(x: &EmbeddingVector, y: &EmbeddingVector) -> Result<f64, MatchError> {
    cosine(x.values(), y.values())
}

/// Q&A pairs plus their question embeddings. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pairs: Vec<QaPair>,
    matrix: EmbeddingMatrix,
    embedder: EmbedderSpec,
    default_threshold: f64,
    source: String,
}

impl KnowledgeBase {
    pub fn new(
        pairs: Vec<QaPair>,
        matrix: EmbeddingMatrix,
        embedder: EmbedderSpec,
        default_threshold: f64,
        source: impl Into<String>,
    ) -> Result<Self, MatchError> {
        if pairs.len() != matrix.rows() {
            return Err(MatchError::Invalid(format!(
                "{} pairs but {} embedding rows",
                pairs.len(),
                matrix.rows()
            )));
        }
        if matrix.dimension() != embedder.dimension {
            return Err(MatchError::Invalid(format!(
                "rows are {}-d but embedder declares {}",
                matrix.dimension(),
                embedder.dimension
            )));
        }
        if !(-1.0..=1.0).contains(&default_threshold) {
            return Err(MatchError::Invalid(format!(
                "threshold {default_threshold} outside [-1, 1]"
            )));
        }
        Ok(KnowledgeBase {
            pairs,
            matrix,
            embedder,
            default_threshold,
            source: source.into(),
        })
    }

    /// Embeds every question with `embedder` and assembles the knowledge base.
    pub fn build(
        pairs: Vec<QaPair>,
        embedder: &dyn Embedder,
        default_threshold: f64,
        source: impl Into<String>,
    ) -> Result<Self, MatchError> {
        let questions: Vec<String> = pairs.iter().map(|p| p.question.clone()).collect();
        let matrix = embedder.embed_batch(&questions);
        Self::new(
            pairs,
            matrix,
            embedder.spec().clone(),
            default_threshold,
            source,
        )
    }

    pub fn pairs(&self) -> &[QaPair] {
        &self.pairs
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn embedder(&self) -> &EmbedderSpec {
        &self.embedder
    }

    pub fn default_threshold(&self) -> f64 {
        self.default_threshold
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn questions(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.question.as_str())
    }

    /// Similarity against every row, descending; ties keep the smaller index.
    pub fn rank_embedding(&self, query: &EmbeddingVector) -> Result<Vec<(usize, f64)>, MatchError> {
        if self.is_empty() {
            return Err(MatchError::EmptyKnowledgeBase);
        }
        let mut ranked = self
            .matrix
            .iter_rows()
            .enumerate()
            .map(|(i, row)| cosine(query.values(), row).map(|s| (i, s)))
            .collect::<Result<Vec<_>, _>>()?;
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked)
    }

    /// Best match for an already-embedded query.
    pub fn top_match(&self, query: &EmbeddingVector) -> Result<(usize, f64), MatchError> {
        if self.is_empty() {
            return Err(MatchError::EmptyKnowledgeBase);
        }
        let mut best = (0, f64::NEG_INFINITY);
        for (i, row) in self.matrix.iter_rows().enumerate() {
            let s = cosine(query.values(), row)?;
            if s.total_cmp(&best.1) == Ordering::Greater {
                best = (i, s);
            }
        }
        Ok(best)
    }

    pub fn answer_embedding(
        &self,
        query: &EmbeddingVector,
        threshold: Option<f64>,
    ) -> Result<MatchResult, MatchError> {
        let (index, confidence) = self.top_match(query)?;
        Ok(self.decide(index, confidence, threshold))
    }

    /// Applies the threshold (inclusive) to a top match.
    pub fn decide(&self, index: usize, confidence: f64, threshold: Option<f64>) -> MatchResult {
        let threshold = threshold.unwrap_or(self.default_threshold);
        let accepted = confidence >= threshold;
        let pair = &self.pairs[index];
        MatchResult {
            matched_index: accepted.then_some(index),
            confidence,
            answer: accepted.then(|| pair.answer.clone()),
            matched_question: accepted.then(|| pair.question.clone()),
            source: pair
                .source_url
                .clone()
                .unwrap_or_else(|| self.source.clone()),
            ranked: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matched_index: Option<usize>,
    /// Highest similarity over the knowledge base, reported even on rejection.
    pub confidence: f64,
    pub answer: Option<String>,
    pub matched_question: Option<String>,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranked: Option<Vec<(usize, f64)>>,
}

impl MatchResult {
    pub fn is_rejected(&self) -> bool {
        self.matched_index.is_none()
    }
}

/// A knowledge base paired with the embedder that produced its rows.
#[derive(Clone)]
pub struct Matcher {
    kb: Arc<KnowledgeBase>,
    embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for Matcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Matcher")
            .field("embedder", self.embedder.spec())
            .field("questions", &self.kb.len())
            .finish()
    }
}

impl Matcher {
    pub fn new(kb: Arc<KnowledgeBase>, embedder: Arc<dyn Embedder>) -> Result<Self, MatchError> {
        let spec = embedder.spec();
        if spec.dimension != kb.matrix().dimension() {
            return Err(MatchError::EmbedderMismatch {
                embedder: spec.id.clone(),
                embedder_dim: spec.dimension,
                kb_dim: kb.matrix().dimension(),
            });
        }
        Ok(Matcher { kb, embedder })
    }

    pub fn from_registry(
        kb: Arc<KnowledgeBase>,
        registry: &EmbedderRegistry,
    ) -> Result<Self, MatchError> {
        let embedder = registry.build(kb.embedder())?;
        Self::new(kb, embedder)
    }

    pub fn knowledge_base(&self) -> &Arc<KnowledgeBase> {
        &self.kb
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn rank(&self, question: &str) -> Result<Vec<(usize, f64)>, MatchError> {
        self.kb.rank_embedding(&self.embedder.embed(question))
    }

    pub fn top_match(&self, question: &str) -> Result<(usize, f64), MatchError> {
        self.kb.top_match(&self.embedder.embed(question))
    }

    pub fn answer(&self, question: &str, threshold: Option<f64>) -> Result<MatchResult, MatchError> {
        self.kb.answer_embedding(&self.embedder.embed(question), threshold)
    }
}

/// Ranks `question` against `kb` using the built-in embedder registry.
pub fn rank(kb: &KnowledgeBase, question: &str) -> Result<Vec<(usize, f64)>, MatchError> {
    if kb.is_empty() {
        return Err(MatchError::EmptyKnowledgeBase);
    }
    let embedder = EmbedderRegistry::with_builtins().build(kb.embedder())?;
    kb.rank_embedding(&embedder.embed(question))
}

pub fn answer(
    kb: &KnowledgeBase,
    question: &str,
    threshold: Option<f64>,
) -> Result<MatchResult, MatchError> {
    if kb.is_empty() {
        return Err(MatchError::EmptyKnowledgeBase);
    }
    let embedder = EmbedderRegistry::with_builtins().build(kb.embedder())?;
    kb.answer_embedding(&embedder.embed(question), threshold)
}
