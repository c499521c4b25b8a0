//! Portable JSON model files holding Q&A pairs and question embeddings.
//!
//! Layout (keys always in this order, one pair or row per line):
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "embedder": {"id":"baseline-ngram-v1","dimension":512,"params":{"n":"3"}},
//!   "threshold": 0.75,
//!   "source": "https://example.org/faq",
//!   "pairs": [
//!     {"question":"...","answer":"..."}
//!   ],
//!   "embeddings": [
//!     [0.0,0.125,...]
//!   ]
//! }
//! ```
//!
//! Numbers are written in the shortest decimal form that parses back to
//! the identical `f32`, so a load/save cycle is byte-stable.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{EmbedderSpec, EmbeddingMatrix};
use crate::faq_parser::QaPair;
use crate::matcher::KnowledgeBase;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A model file that could not be read or written.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct FormatError {
    /// Byte offset of the failure, when it is known.
    pub offset: Option<usize>,
    /// Path of the offending field, e.g. `embeddings[3][17]`.
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model file")?;
        if !self.field.is_empty() {
            write!(f, " at `{}`", self.field)?;
        }
        if let Some(offset) = self.offset {
            write!(f, " (byte {offset})")?;
        }
        write!(f, ": {}", self.reason)
    }
}

impl FormatError {
    fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        FormatError {
            offset: None,
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub question: String,
    pub answer: String,
}

/// On-disk representation of a knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub embedder: EmbedderSpec,
    pub threshold: f64,
    pub source: String,
    pub pairs: Vec<PairRecord>,
    pub embeddings: Vec<Vec<f32>>,
}

impl ModelFile {
    pub fn from_knowledge_base(kb: &KnowledgeBase) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            embedder: kb.embedder().clone(),
            threshold: kb.default_threshold(),
            source: kb.source().to_string(),
            pairs: kb
                .pairs()
                .iter()
                .map(|p| PairRecord {
                    question: p.question.clone(),
                    answer: p.answer.clone(),
                })
                .collect(),
            embeddings: kb.matrix().iter_rows().map(<[f32]>::to_vec).collect(),
        }
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), FormatError> {
        if self.format_version != FORMAT_VERSION {
            return Err(FormatError::field(
                "format_version",
                format!(
                    "unsupported version {}, expected {FORMAT_VERSION}",
                    self.format_version
                ),
            ));
        }
        if self.embedder.id.is_empty() {
            return Err(FormatError::field("embedder.id", "must not be empty"));
        }
        if self.embedder.dimension == 0 {
            return Err(FormatError::field("embedder.dimension", "must be positive"));
        }
        if !self.threshold.is_finite() || !(-1.0..=1.0).contains(&self.threshold) {
            return Err(FormatError::field(
                "threshold",
                format!("{} outside [-1, 1]", self.threshold),
            ));
        }
        if self.pairs.is_empty() {
            return Err(FormatError::field("pairs", "a model needs at least one pair"));
        }
        for (i, pair) in self.pairs.iter().enumerate() {
            if pair.question.trim().is_empty() {
                return Err(FormatError::field(
                    format!("pairs[{i}].question"),
                    "question is empty",
                ));
            }
        }
        if self.pairs.len() != self.embeddings.len() {
            return Err(FormatError::field(
                "embeddings",
                format!(
                    "{} rows for {} pairs",
                    self.embeddings.len(),
                    self.pairs.len()
                ),
            ));
        }
        for (i, row) in self.embeddings.iter().enumerate() {
            if row.len() != self.embedder.dimension {
                return Err(FormatError::field(
                    format!("embeddings[{i}]"),
                    format!(
                        "row has {} values, embedder dimension is {}",
                        row.len(),
                        self.embedder.dimension
                    ),
                ));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(FormatError::field(
                    format!("embeddings[{i}][{j}]"),
                    "value is not finite",
                ));
            }
        }
        Ok(())
    }

    pub fn into_knowledge_base(self) -> Result<KnowledgeBase, FormatError> {
        self.validate()?;
        let dimension = self.embedder.dimension;
        let matrix = EmbeddingMatrix::from_rows(dimension, &self.embeddings)
            .ok_or_else(|| FormatError::field("embeddings", "ragged rows"))?;
        let pairs = self
            .pairs
            .into_iter()
            .enumerate()
            .map(|(index, p)| QaPair {
                question: p.question,
                answer: p.answer,
                index,
                source_url: None,
            })
            .collect();
        KnowledgeBase::new(pairs, matrix, self.embedder, self.threshold, self.source)
            .map_err(|e| FormatError::field("", e.to_string()))
    }

    /// Serializes in the canonical layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        self.validate()?;
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"format_version\": {},\n", self.format_version));
        out.push_str(&format!("  \"embedder\": {},\n", json(&self.embedder)));
        out.push_str(&format!("  \"threshold\": {},\n", json(&self.threshold)));
        out.push_str(&format!("  \"source\": {},\n", json(&self.source)));
        out.push_str("  \"pairs\": [\n");
        push_lines(&mut out, self.pairs.iter().map(json));
        out.push_str("  ],\n");
        out.push_str("  \"embeddings\": [\n");
        push_lines(&mut out, self.embeddings.iter().map(|r| json(r.as_slice())));
        out.push_str("  ]\n");
        out.push_str("}\n");
        Ok(out.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut de = serde_json::Deserializer::from_slice(bytes);
        let file: ModelFile = serde_path_to_error::deserialize(&mut de).map_err(|err| {
            let field = err.path().to_string();
            let inner = err.into_inner();
            FormatError {
                offset: Some(byte_offset(bytes, inner.line(), inner.column())),
                field: if field == "." { String::new() } else { field },
                reason: inner.to_string(),
            }
        })?;
        de.end().map_err(|e| FormatError {
            offset: Some(byte_offset(bytes, e.line(), e.column())),
            field: String::new(),
            reason: e.to_string(),
        })?;
        file.validate()?;
        Ok(file)
    }
}

fn push_lines(out: &mut String, items: impl ExactSizeIterator<Item = String>) {
    let last = items.len().saturating_sub(1);
    for (i, item) in items.enumerate() {
        out.push_str("    ");
        out.push_str(&item);
        if i != last {
            out.push(',');
        }
        out.push('\n');
    }
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string(value).expect("model values serialize")
}

/// Converts serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = bytes
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

pub fn to_bytes(kb: &KnowledgeBase) -> Result<Vec<u8>, FormatError> {
    ModelFile::from_knowledge_base(kb).to_bytes()
}

pub fn from_bytes(bytes: &[u8]) -> Result<KnowledgeBase, FormatError> {
    ModelFile::from_bytes(bytes)?.into_knowledge_base()
}

pub fn save_model(kb: &KnowledgeBase, path: &Path) -> Result<(), ModelError> {
    let bytes = to_bytes(kb)?;
    std::fs::write(path, bytes).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<KnowledgeBase, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError {
        offset: None,
        field: String::new(),
        reason: format!("cannot read {}: {e}", path.display()),
    })?;
    from_bytes(&bytes)
}

/// Like [`load_model`] but keeps I/O failures distinct from format errors.
pub fn try_load_model(path: &Path) -> Result<KnowledgeBase, ModelError> {
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(from_bytes(&bytes)?)
}
