//! Feedforward neural networks trained by backpropagation, plus a
//! data-parallel trainer that shards the training set across child networks
//! and merges them by parameter averaging.
//!
//! Batches are matrices with one instance per column. The usual entry points
//! are [`Network`], [`ParallelNetwork`], [`mnist::load_mnist_dir`] and the
//! presets in [`experiments`].

pub mod activation;
pub mod checkpoint;
pub mod combine;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod mnist;
pub mod network;
pub mod parallel;
pub mod trainable;

pub use activation::ActivationKind;
pub use combine::Combiner;
pub use config::{load_config, parse_config, RunConfig};
pub use dataset::{Dataset, Shard};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{ConfidenceKind, Metrics};
pub use network::{EpochStats, GradientMode, Layer, Network, NetworkConfig, WeightInit};
pub use parallel::ParallelNetwork;
pub use trainable::TrainableNetwork;
