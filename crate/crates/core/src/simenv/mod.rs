//! Seeded synthetic RAG world: typed queries with gold answers, retrievers
//! with per-type skill, a mock judge and a mock generator.
//!
//! Every draw comes from a SplitMix64 stream keyed by the world seed, a
//! purpose label and the query/retriever ids, so any single outcome can be
//! regenerated in isolation.

mod baselines;
mod config;
mod world;

pub use baselines::{oracle_policies, oracle_policies_from, outcome_table, BaselinePolicies, OutcomeTable};
pub use config::{PopularTail, SimConfig};
pub use world::{
    generate_query, generate_world, judge_dimension, popularity_band, read_queries_jsonl, write_queries_jsonl, SimQuery,
    SimWorld, Split,
};
