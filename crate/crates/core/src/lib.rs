//! Associative memories built from a similarity score, a separation function,
//! and a projection.
//!
//! * [`memory`]: universal Hopfield networks over a [`MemoryStore`] in pixel space.
//! * [`features`]: semantic memories that score in a feature space but return
//!   stored pixels.
//! * [`fully_semantic`]: memories that keep only embeddings and decode outputs.
//! * [`nn`]: the MLP encoders and decoders used as feature and generative maps.
//! * [`corrupt`]: seeded image corruptions used as queries and augmentations.
//! * [`format`] and [`datasets`]: on-disk formats and image sources.
//!
//! ```
//! use featmem_core::{uhn_retrieve, DataVector, MemoryStore, Separation, Similarity};
//!
//! let store = MemoryStore::from_columns([vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
//! let query = DataVector::new(vec![0.9, 0.2]).unwrap();
//! let out = uhn_retrieve(&query, &store, Similarity::NegL2, &Separation::Max).unwrap();
//! assert_eq!(out.top_index, 0);
//! assert_eq!(out.vector.values(), &[1.0, 0.0]);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrupt;
pub mod datasets;
pub mod error;
pub mod features;
pub mod format;
pub mod fully_semantic;
pub mod memory;
pub mod nn;
pub mod vector;

pub use corrupt::{corrupt, derive_seed, AugmentationPipeline, CorruptionKind, CorruptionSpec};
pub use error::{Error, Result};
pub use features::{
    build_embedding_store, semantic_retrieve, EmbeddingStore, ExternalTable, FeatureMap, SemanticMemory,
};
pub use fully_semantic::{fs_retrieve, memory_footprint, Footprint, FullySemanticMemory, GenerativeMap};
pub use memory::{
    argmax, iterate_retrieve, project, score, separate, uhn_retrieve, AssociativeMemory, MemoryStore,
    RetrievalResult, ScoreVector, Separation, Similarity,
};
pub use vector::{DataVector, Shape};
