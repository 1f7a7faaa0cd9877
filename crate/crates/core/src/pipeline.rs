//! Glue between the stages: cohort-wide feature extraction, split and
//! normalisation, the reference model used for channel ranking, and subset
//! resolution.

use crate::corpus::{
    annotate_labels, load_recording, split_train_test, CohortManifest, CorpusError, ParticipantRecord, SyntheticCohort,
};
use crate::model::{Bisam, Modality, ModelConfig, ModelError};
use crate::rng;
use crate::selection::{
    rank_channels, select_subset, ChannelSpec, ChannelSubset, ImportanceReport, SelectionError, SubsetSource,
};
use crate::spectral::{BandDef, BandPowerTable, FeatureExtractor, SpectralError, SpectralParams};
use crate::trainer::{train, PreparedCohort, TrainConfig, TrainError};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("subject {id}: {source}")]
    Subject { id: String, source: Box<PipelineError> },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Config(String),
}

impl PipelineError {
    /// Process exit status: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Train(e) if e.is_numerical() => 2,
            PipelineError::Model(ModelError::Tensor(crate::tensor::TensorError::NonFinite { .. })) => 2,
            PipelineError::Subject { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn for_subject<T>(id: &str, r: std::result::Result<T, impl Into<PipelineError>>) -> Result<T> {
    r.map_err(|e| PipelineError::Subject { id: id.to_string(), source: Box::new(e.into()) })
}

/// Band powers of every participant in `manifest`, in manifest order.
/// Subjects are processed in parallel on the current rayon pool.
pub fn manifest_features(manifest: &CohortManifest, params: &SpectralParams) -> Result<BandPowerTable> {
    manifest.validate()?;
    let extractor = FeatureExtractor::new(manifest.sampling_rate, BandDef::standard(), params)?;
    let rows = manifest
        .participants
        .par_iter()
        .map(|p| {
            let rec = for_subject(&p.id, load_recording(manifest, &p.id))?;
            let row = for_subject(&p.id, extractor.extract(&rec))?;
            Ok((p.id.clone(), row))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandPowerTable::from_rows(manifest.channel_names.clone(), rows)?)
}

/// Band powers of a synthetic cohort computed in memory. With `channels`,
/// only those channels are generated, which keeps small experiments cheap.
pub fn synthetic_features(
    cohort: &SyntheticCohort,
    channels: Option<&[String]>,
    params: &SpectralParams,
) -> Result<BandPowerTable> {
    let extractor = FeatureExtractor::new(cohort.spec.sampling_rate_hz, BandDef::standard(), params)?;
    let names = channels.map(<[String]>::to_vec).unwrap_or_else(|| cohort.spec.channels.clone());
    let rows = (0..cohort.len())
        .into_par_iter()
        .map(|i| {
            let id = &cohort.participants[i].id;
            let rec = for_subject(id, cohort.recording(i, Some(&names)))?;
            let row = for_subject(id, extractor.extract(&rec))?;
            Ok((id.clone(), row))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandPowerTable::from_rows(names, rows)?)
}

/// Stratified split, then train-only normalisation of features and descriptives.
pub fn prepare_cohort(
    table: &BandPowerTable,
    participants: &[ParticipantRecord],
    ratio: f64,
    seed: u64,
) -> Result<PreparedCohort> {
    let cohort = annotate_labels(participants);
    let split = split_train_test(&cohort, ratio, rng::derive_seed(seed, "split"))?;
    Ok(PreparedCohort::prepare(table, &cohort, split).map_err(TrainError::from)?)
}

/// Share of the training subjects held out to score channel importance.
pub const RANKING_HOLDOUT: f64 = 0.2;

/// Stratified partition of `labels` into (fit, holdout) index lists.
fn holdout_split(labels: &[u8], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let (mut fit, mut hold) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng::stream(seed, &format!("holdout/{class}")));
        let n_hold = ((fraction * idx.len() as f64).round() as usize).min(idx.len());
        hold.extend_from_slice(&idx[..n_hold]);
        fit.extend_from_slice(&idx[n_hold..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

/// Ranks the channels of `data` by permutation importance.
///
/// A signal-only model over every channel is fitted on part of the training
/// subjects and scored on the rest, so the ranking never sees the test split
/// and is not inflated by channels the model merely memorised.
pub fn reference_importance(
    data: &PreparedCohort,
    template: &ModelConfig,
    train_cfg: &TrainConfig,
    repetitions: usize,
    seed: u64,
) -> Result<(Bisam, ImportanceReport)> {
    let cfg = ModelConfig {
        modality: Modality::SignalOnly,
        channel_subset: data.channels.clone(),
        seed: rng::derive_seed(seed, "reference/model"),
        ..template.clone()
    };
    let tcfg = TrainConfig { seed: rng::derive_seed(seed, "reference/train"), ..train_cfg.clone() };
    let (x, y) = data.inputs(&data.train, &cfg)?;
    let (fit, hold) = holdout_split(&y, RANKING_HOLDOUT, rng::derive_seed(seed, "reference/split"));
    let pick = |idx: &[usize]| -> (Vec<_>, Vec<u8>) { idx.iter().map(|&i| (x[i].clone(), y[i])).unzip() };
    let (x_fit, y_fit) = pick(&fit);
    let (x_hold, y_hold) = pick(&hold);
    let mut model = Bisam::new(cfg)?;
    train(&mut model, &x_fit, &y_fit, &tcfg)?;
    let report =
        rank_channels(&model, &x_hold, &y_hold, &data.channels, repetitions, rng::derive_seed(seed, "reference/rank"))?;
    Ok((model, report))
}

/// The subset a single run uses.
pub fn resolve_subset(
    spec: ChannelSpec,
    report: Option<&ImportanceReport>,
    montage: &[String],
) -> Result<ChannelSubset> {
    let (source, k) = spec.source();
    Ok(select_subset(source, k, report, montage)?)
}

/// The four subsets of the experiment matrix: every channel, then 16, 8 and 4
/// channels from the preset list or, for a computed spec, from the ranking.
pub fn matrix_subsets(
    spec: ChannelSpec,
    report: Option<&ImportanceReport>,
    montage: &[String],
) -> Result<Vec<ChannelSubset>> {
    let computed = matches!(spec, ChannelSpec::Computed(_));
    let mut out = vec![select_subset(SubsetSource::All, 0, None, montage)?];
    for (preset, k) in
        [(SubsetSource::PaperPreset16, 16), (SubsetSource::PaperPreset8, 8), (SubsetSource::PaperPreset4, 4)]
    {
        let source = if computed { SubsetSource::Computed } else { preset };
        out.push(select_subset(source, k, report, montage)?);
    }
    Ok(out)
}

/// True when `spec` needs a channel ranking before any model can be built.
pub fn needs_ranking(spec: ChannelSpec) -> bool {
    matches!(spec, ChannelSpec::Computed(_))
}
