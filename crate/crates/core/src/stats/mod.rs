//! Rank correlation and binary classification metrics.

mod metrics;
mod spearman;

pub use metrics::{cohen_kappa, confusion, metrics, Averaging, ConfusionMatrix, Kappa, MetricReport};
pub use spearman::{average_ranks, pearson, spearman_rho, RankVector};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("correlation undefined for a constant sequence")]
    Constant,
    #[error("label or prediction {0} is not 0 or 1")]
    NotBinary(u8),
    #[error("non-finite observation")]
    NonFinite,
}
