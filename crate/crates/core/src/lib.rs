//! Semantic influence analysis between documents.
//!
//! An *influencer* document (for example a description of an ethical theory)
//! is compared against an *influencee* (for example a regulation split into
//! preamble and provisions) with Semantic Textual Similarity computed by an
//! ensemble of sentence encoders. Per-model scores are combined by averaging
//! and plurality voting, and written out as CSV/JSON tables, radar charts and
//! a markdown summary.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: ingestion, preamble/provisions split, sentence segmentation,
//!   temporal precedence checks.
//! - [`preprocess`]: the twelve influencer preprocessing rules.
//! - [`embed`]: model registry, term-frequency reference backend, pooling,
//!   embedding cache and model bundle manifests.
//! - [`similarity`]: cosine similarity, cosine distance and document-level
//!   aggregation.
//! - [`ensemble`]: score tables, statistics, voting and ranking.
//! - [`report`]: deterministic CSV/JSON/SVG/markdown emission.
//! - [`config`] and [`pipeline`]: declarative runs over a run directory.

pub mod config;
pub mod corpus;
pub mod digest;
pub mod embed;
pub mod ensemble;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod similarity;

pub use corpus::{DateRange, Document, DocumentPart, PartLabel, PrecedenceRelation, Role, Sentence};
pub use embed::{EmbeddingMatrix, EmbeddingVector, ModelSpec, Pooling};
pub use ensemble::{AggregateStats, ScoreTable, VoteResult};
pub use similarity::{AggregationStrategy, SentenceSimMatrix, SimilarityScore};
