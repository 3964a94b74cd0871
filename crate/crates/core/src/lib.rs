//! Contrastive node-representation learning on graphs.
//!
//! A GCN (or MLP) encoder embeds two stochastic views of a graph; the
//! embeddings are postprocessed (column standardization by default), projected
//! onto the unit sphere and trained with a subsampled NT-Xent loss. Frozen
//! embeddings are then scored with a linear probe, alignment/uniformity and
//! clustering indices.
//!
//! Everything runs on a small tape-based reverse-mode autodiff over dense
//! `f64` matrices, with sparse adjacency products.

pub mod augment;
pub mod autodiff;
pub mod config;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod graph;
pub mod model;
pub mod objective;
pub mod seed;
pub mod tensor;

pub use augment::{make_views, AugmentConfig, View, ViewPair};
pub use autodiff::{ActivationKind, NodeId, Tape};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::{MetricsReport, ProbeConfig};
pub use graph::{load_bundle, save_bundle, GraphBundle, NormalizedAdjacency, Splits};
pub use model::{embed_full, Arch, EncoderConfig, ModelParams, PostprocessorKind};
pub use objective::{train, EpochRecord, LossKind, TrainConfig, TrainOutput};
pub use tensor::{SparseMatrix, Tensor};
