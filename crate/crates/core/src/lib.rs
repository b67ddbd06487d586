//! Knowledge-base completion engine: TransE and RESCAL embeddings trained
//! with a pairwise margin ranking loss, fed by either uniform random
//! negative sampling or distributional negative sampling, and evaluated
//! with filtered link-prediction metrics.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod eval;
pub mod kg;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod synth;
pub mod trainer;

pub use scalar::Scalar;

/// Double-precision embeddings, the default for training and evaluation.
pub type Embeddings = model::EmbeddingStore<f64>;
/// Single-precision embeddings.
pub type Embeddings32 = model::EmbeddingStore<f32>;
pub type Gradients = model::GradientBuffer<f64>;
pub type Index = sampler::SimilarityIndex<f64>;
pub type Adam = trainer::AdamState<f64>;
pub type Config = trainer::TrainConfig<f64>;
