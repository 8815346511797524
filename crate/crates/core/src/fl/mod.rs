//! Federated learning building blocks: model, data, local training and
//! aggregation.

pub mod aggregate;
pub mod data;
pub mod mnist;
pub mod model;
pub mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use aggregate::{aggregate_benchmark, aggregate_proposed, evaluate, BenchmarkKind, Evaluation};
pub use data::{gaussian_mixture, partition_dataset, Dataset, DatasetPartition, PartitionScheme};
pub use mnist::load_mnist;
pub use model::{Classifier, LocalObjective, MlpArch, MlpObjective, Model};
pub use train::{local_sgd, LocalUpdate, TrainingHyperparams};

#[derive(Debug, Error)]
pub enum FlError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("client {client} has no training samples")]
    EmptyShard { client: usize },
    #[error("non-finite loss or parameters at client {client}, local step {step}")]
    NumericalDivergence { client: usize, step: usize },
    #[error("nothing to aggregate")]
    EmptyAggregation,
    #[error("expected updates from all {expected} clients, got {got}")]
    MissingUpdates { expected: usize, got: usize },
    #[error("cannot evaluate on an empty dataset")]
    EmptyDataset,
    #[error("partition infeasible: {0}")]
    Partition(String),
    #[error("{0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("{}: malformed IDX file: {message}", path.display())]
    Format { path: PathBuf, message: String },
}
