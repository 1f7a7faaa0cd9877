//! Training, evaluation and the nine-cell experiment matrix.

mod data;
mod matrix;

pub use data::{PreparedCohort, Subject};
pub use matrix::{
    matrix_cells, render_table, run_cell, run_matrix, run_matrix_with_models, CellResult, CellSpec, MatrixResult,
};

use crate::model::{bisam_forward, Bisam, ModelError, Predictor, SubjectTokens};
use crate::rng;
use crate::stats::{confusion, metrics, Averaging, MetricReport, StatsError};
use crate::tensor::{adam_step, Adam, AdamState, Mode, Tape, TensorError};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("{inputs} inputs but {labels} labels")]
    LengthMismatch { inputs: usize, labels: usize },
    #[error("training diverged in epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Selection(#[from] crate::selection::SelectionError),
}

impl TrainError {
    /// True for numerical failures, as opposed to invalid inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            TrainError::Diverged { .. }
                | TrainError::Tensor(TensorError::NonFinite { .. })
                | TrainError::Model(ModelError::Tensor(TensorError::NonFinite { .. }))
        )
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Per-class weights of the cross-entropy loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeights {
    /// `N / (2 * n_class)` from the training labels.
    InverseFrequency,
    /// Plain unweighted mean.
    Uniform,
    Manual([f64; 2]),
}

impl ClassWeights {
    pub fn resolve(self, labels: &[u8]) -> Option<[f64; 2]> {
        match self {
            ClassWeights::Uniform => None,
            ClassWeights::Manual(w) => Some(w),
            ClassWeights::InverseFrequency => {
                let n = labels.len() as f64;
                let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
                let w = |count: f64| if count > 0.0 { n / (2.0 * count) } else { 1.0 };
                Some([w(n - pos), w(pos)])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(flatten)]
    pub adam: Adam,
    pub class_weights: ClassWeights,
    pub seed: u64,
    /// Stop after this many epochs without the training loss improving by `min_delta`.
    pub early_stop_patience: Option<usize>,
    pub early_stop_min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 16,
            adam: Adam::default(),
            class_weights: ClassWeights::InverseFrequency,
            seed: 0,
            early_stop_patience: None,
            early_stop_min_delta: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::Config("epochs and batch_size must be at least 1".into()));
        }
        if !(self.adam.lr >= 0.0) || !self.adam.lr.is_finite() {
            return Err(TrainError::Config(format!("learning rate {}", self.adam.lr)));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) || !(self.adam.eps > 0.0) {
            return Err(TrainError::Config("Adam betas must lie in [0, 1) and eps must be positive".into()));
        }
        if let ClassWeights::Manual(w) = self.class_weights {
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
                return Err(TrainError::Config(format!("class weights {w:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, weighted by batch size.
    pub loss: f64,
    /// Training accuracy of the (dropout-perturbed) forward passes.
    pub accuracy: f64,
    #[serde(skip)]
    pub seconds: f64,
    /// Subject indices in visiting order.
    #[serde(skip)]
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn final_epoch(&self) -> Option<usize> {
        self.epochs.last().map(|e| e.epoch)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Minimises class-weighted cross-entropy with Adam, in place.
pub fn train(model: &mut Bisam, inputs: &[SubjectTokens], labels: &[u8], cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    if inputs.len() != labels.len() {
        return Err(TrainError::LengthMismatch { inputs: inputs.len(), labels: labels.len() });
    }
    let weights = cfg.class_weights.resolve(labels);
    let mut state = AdamState::new();
    let mut log = TrainLog::default();
    let (mut best, mut stale) = (f64::INFINITY, 0usize);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &format!("shuffle/{epoch}")));
        let mut drop_rng = rng::stream(cfg.seed, &format!("dropout/{epoch}"));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        let diverged = |e: TrainError| match e {
            e if e.is_numerical() => TrainError::Diverged { epoch, detail: e.to_string() },
            e => e,
        };

        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&SubjectTokens> = batch.iter().map(|&i| &inputs[i]).collect();
            let y: Vec<usize> = batch.iter().map(|&i| usize::from(labels[i])).collect();
            let mut tape = Tape::new();
            let bound = tape.bind(&model.params);
            let out = bisam_forward(&mut tape, &bound, &model.config, &refs, Mode::Train, &mut drop_rng)
                .map_err(|e| diverged(e.into()))?;
            let loss =
                tape.cross_entropy(out.logits, &y, weights.as_ref().map(|w| &w[..])).map_err(|e| diverged(e.into()))?;
            let loss_value = tape.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(TrainError::Diverged { epoch, detail: format!("loss {loss_value}") });
            }
            loss_sum += loss_value * batch.len() as f64;
            correct +=
                tape.value(out.logits).data().chunks(2).zip(&y).filter(|(l, &t)| usize::from(l[1] > l[0]) == t).count();
            tape.backward(loss)?;
            let grads = tape.collect_grads(&bound);
            adam_step(&mut model.params, &grads, &mut state, &cfg.adam)?;
            model.trained_steps += 1;
        }
        if model.params.iter().any(|(_, t)| !t.is_finite()) {
            return Err(TrainError::Diverged { epoch, detail: "non-finite weights after update".into() });
        }

        let loss = loss_sum / inputs.len() as f64;
        log.epochs.push(EpochLog {
            epoch,
            loss,
            accuracy: correct as f64 / inputs.len() as f64,
            seconds: start.elapsed().as_secs_f64(),
            order,
        });
        if let Some(patience) = cfg.early_stop_patience {
            if loss < best - cfg.early_stop_min_delta {
                best = loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(log)
}

/// Eval-mode predictions on `inputs`, summarised against `labels`.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, inputs: &[SubjectTokens], labels: &[u8]) -> Result<MetricReport> {
    if inputs.is_empty() {
        return Err(TrainError::EmptyTestSet);
    }
    if inputs.len() != labels.len() {
        return Err(TrainError::LengthMismatch { inputs: inputs.len(), labels: labels.len() });
    }
    let preds = model.predict(inputs)?;
    let cm = confusion(labels, &preds)?;
    Ok(metrics(&cm, Averaging::BinaryPositive))
}
