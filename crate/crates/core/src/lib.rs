//! Automated scoring of Alternate Uses Task (AUT) responses.
//!
//! Originality is the semantic distance between a prompt embedding and a
//! response embedding (`1 - cosine similarity`, range `[0, 2]`); flexibility
//! is the summed distance over adjacent responses in generation order.
//! Scores from several embedding models are standardized and averaged into
//! an ensemble. The [`stats`] module carries the validation statistics
//! (correlations, ICC(2,k), group comparisons, power analysis).
//!
//! Module map:
//!
//! - [`data`]: corpus types and trial construction
//! - [`embed`]: embedding backends, pooling, stop words, on-disk cache
//! - [`scoring`]: distance, top-k originality, flexibility, ensembling
//! - [`stats`]: psychometric statistics
//! - [`io`]: CSV/JSON boundary (datasets, configs, score export, manifests)
//! - [`cli`]: command implementations behind the `dtscore` binary

pub mod cli;
pub mod data;
pub mod embed;
pub mod io;
pub mod scoring;
pub mod stats;

pub use data::{
    build_trials, flatten_trials, EmbeddingVector, HumanRating, PromptItem, RatingKind,
    ResponseRecord, ScoreTable, SubjectTrial,
};
pub use embed::{embed_batch, Backend, Embedder, ModelConfig, PoolingStrategy};
pub use scoring::{
    elaboration, ensemble, flexibility, fluency, semantic_distance, standardize,
    subject_originality, EnsembleSpec, StandardizeScope,
};
