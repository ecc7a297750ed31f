//! Deep metric learning with a lifted structured embedding objective.
//!
//! This crate trains small MLP embedding networks with one of four metric
//! losses — contrastive, triplet, and a lifted structured loss in nonsmooth
//! and smooth variants — and evaluates the learned embeddings with Recall@K,
//! NMI, and pairwise F1 over k-means clusters. Everything is deterministic
//! per seed: data synthesis, weight init, batch sampling, and clustering each
//! draw from their own named seed.
//!
//! The main entry points:
//!
//! - [`data::make_blobs`] / [`data::load_dataset`] build a [`data::LabeledDataset`];
//! - [`data::class_disjoint_split`] separates train and test classes;
//! - [`train::train`] runs the optimization loop from a [`config::RunConfig`];
//! - [`eval`] scores embeddings and renders an [`eval::EvalReport`];
//! - [`model::gradient_check`] validates analytic gradients against finite
//!   differences.

pub mod batch;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod sampler;
pub mod train;

pub use batch::{pair_sets, pairwise_sq_distances, EmbeddingBatch, PairSets, PairwiseDistances};
pub use config::RunConfig;
pub use data::{class_disjoint_split, make_blobs, LabeledDataset, SplitOrdering, SplitSpec};
pub use error::{Error, Result};
pub use eval::{kmeans, nmi, pairwise_f1, recall_at_k, Clustering, EvalReport};
pub use loss::{LossConfig, LossKind, LossOutput, LossSpec};
pub use model::{gradient_check, Activation, GradCheckConfig, GradCheckStatus, Mlp, MlpSpec};
pub use train::{train, TrainOutcome};
