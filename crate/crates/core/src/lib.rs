//! Extract question/answer pairs from FAQ pages, embed the questions and
//! answer free-form questions by cosine similarity.
//!
//! ```
//! use faqmatch_core::{parse_faq, EmbedderRegistry, EmbedderSpec, KnowledgeBase, Matcher};
//! use std::sync::Arc;
//!
//! let html = br#"<main>
//!   <h3>How does it spread?</h3><p>Mainly person to person.</p>
//!   <h3>What are the symptoms?</h3><p>Fever and cough.</p>
//! </main>"#;
//! let report = parse_faq(html, None).unwrap();
//! assert_eq!(report.pairs.len(), 2);
//!
//! let registry = EmbedderRegistry::with_builtins();
//! let embedder = registry.build(&EmbedderSpec::default()).unwrap();
//! let kb = KnowledgeBase::build(report.pairs, embedder.as_ref(), 0.75, "example").unwrap();
//! let matcher = Matcher::new(Arc::new(kb), embedder).unwrap();
//! let result = matcher.answer("What are the symptoms?", None).unwrap();
//! assert_eq!(result.answer.as_deref(), Some("Fever and cough."));
//! ```

pub mod dom;
pub mod embedding;
pub mod evaluation;
pub mod faq_parser;
pub mod matcher;
pub mod model_store;

pub use dom::{parse_html, Document, DomError, NodeId};
pub use embedding::{
    embed, embed_batch, load_precomputed, Embedder, EmbedderRegistry, EmbedderSpec,
    EmbeddingError, EmbeddingMatrix, EmbeddingVector, NgramHashEmbedder,
};
pub use evaluation::{
    evaluate, export_curve, threshold_sweep, BenchmarkResult, ConfusionCounts, EvalError,
    Expected, TestCase,
};
pub use faq_parser::{parse_faq, ElementSignature, ParseError, ParseReport, QaPair, QaPairSet};
pub use matcher::{
    answer, cosine_similarity, rank, KnowledgeBase, MatchError, MatchResult, Matcher,
    DEFAULT_THRESHOLD,
};
pub use model_store::{load_model, save_model, FormatError, ModelError, ModelFile};
