//! Retrieval evaluation for image-text embeddings and hash codes.
//!
//! Embeddings and codes are read from disk ([`codec`]), scored with
//! [`similarity::pairwise`], ranked and evaluated ([`eval`]), or indexed
//! for approximate search ([`ann`]) and timed at scale ([`bench`]).

pub mod ann;
pub mod bench;
pub mod cli;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod model;
pub mod similarity;

pub use error::{FicoError, Result};
pub use model::{
    BinaryCodeSet, Direction, Dtype, EmbeddingSet, EvalReport, InstanceGroups, LabelMatrix, RankedRetrieval,
    SimilarityMatrix, Split, Task, Values,
};
pub use similarity::{pairwise, Measure, Representation};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
