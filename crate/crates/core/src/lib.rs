//! Freezing-of-gait classification from resting-state EEG band powers and
//! descriptive variables.
//!
//! The crate covers the whole path from raw multichannel recordings to a
//! reported confusion matrix: multitaper band-power features, a small
//! reverse-mode autodiff engine, a dual-pathway self-attention classifier,
//! permutation-importance channel ranking and a reproducible experiment runner.

// Range checks are written as `!(x > lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod corpus;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod spectral;
pub mod stats;
pub mod tensor;
pub mod trainer;
