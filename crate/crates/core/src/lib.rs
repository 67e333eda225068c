//! Contextualized concept embeddings for multi-label zero-shot annotation.
//!
//! The pipeline learns a semantic embedding space from co-occurring labels
//! (a Siamese network over tf-idf label features and topic-model context
//! histograms), maps instance feature vectors into that space with a bank of
//! nu-SVR regressors, and ranks every known label for a test instance by
//! inverse minimum distance to its stored concept embeddings.
//!
//! Modules follow the pipeline stages:
//!
//! - [`corpus`]: annotated datasets, vocabularies and train/test split plans
//! - [`semantics`]: tf-idf label usage, label gram features, LDA contexts
//! - [`ce`]: the Siamese embedding network and its training loop
//! - [`concept_space`]: the store of embedded concepts, OOV inference,
//!   target compression and semantic priming
//! - [`instance_features`]: GMM-codebook bag-of-words for frame inputs and
//!   validated loading of precomputed vectors
//! - [`im`]: nu-SVR instance-to-embedding regression
//! - [`evaluation`]: P@k / R@k, example- and concept-based MAP, reports
//! - [`experiment`]: config-driven end-to-end experiment runner

pub mod ce;
pub mod concept_space;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod im;
pub mod instance_features;
pub mod semantics;

mod vecmath;

pub use error::{Error, Result};
