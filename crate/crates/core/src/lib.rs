//! Capability-aware retriever routing.
//!
//! A router picks, per query, one retriever from a pool or the null
//! retriever (no retrieval). Each retriever is a learnable token fed through
//! two shared encoders, one for retrieval quality and one for generation
//! utility. A query-conditioned attention fuses the two embeddings and the
//! router takes the cosine argmax against the query's utility embedding.
//!
//! Modules:
//! - [`numerics`]: linear algebra, stable nonlinearities, SplitMix64, gradient checks
//! - [`model`]: featurizer, encoders, fusion, routing, model files
//! - [`supervision`]: judge ingestion, EM/F1, utility scores, contrast sets
//! - [`training`]: contrastive and fusion objectives, both training stages
//! - [`simenv`]: seeded synthetic RAG world with mock judge and generator
//! - [`eval`]: policy evaluation, abstention analysis, latency benchmark
//! - [`pipeline`]: the whole flow in memory, world to comparison table
//! - [`gradsuite`]: the randomized finite-difference suite over every loss

pub mod error;
pub mod eval;
pub mod gradsuite;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod simenv;
pub mod supervision;
pub mod training;

pub use error::{Error, ErrorClass, Result};
