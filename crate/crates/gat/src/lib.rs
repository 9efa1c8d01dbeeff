//! Constraint-regularized graph attention classifier for table headers.
//!
//! A two-layer multi-head attention network reads a [`TableGraph`] and emits
//! a 22-way class distribution for every row and column header. Training
//! minimizes cross-entropy plus a weighted structural constraint penalty
//! using a small reverse-mode tape.
//!
//! [`TableGraph`]: tablekb_core::graph::TableGraph

pub mod constraint;
pub mod model;
pub mod tape;
pub mod train;

pub use constraint::{constraint_forward, ConstraintBreakdown};
pub use model::{
    attention_coefficients, threshold_labels, Dropout, FeatureSpec, GatLayer, GatModel, HeaderPrediction, ModelDims,
};
pub use train::{gradient_check, loss_and_grad, total_loss, train, EpochStats, Example, GradCheckReport, LossParts, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum GatError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite loss on table {table} at epoch {epoch}")]
    NonFinite { table: String, epoch: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GatError>;
