//! Router architecture: hashed text features, the two shared capability
//! encoders, per-retriever learnable tokens, attention fusion and
//! cosine-similarity routing.

mod checkpoint;
mod featurize;
mod fusion;
mod params;
mod router;

pub(crate) use checkpoint::ModelFile;
pub use checkpoint::FORMAT_VERSION;
pub use featurize::{featurize, ngram_slots, FeaturizerConfig, SparseVec};
pub use fusion::{FusionBackward, FusionParams, FusionTrace};
pub use params::{EncoderParams, ParamBlocks};
pub use router::{
    CompiledRouter, ModelConfig, QueryEmbedding, RouterModel, RoutingDecision, NULL_RETRIEVER_NAME,
};
