//! Channel ranking by permutation importance, and the channel subsets used
//! by the reduced models.
//!
//! A channel's importance is the mean accuracy lost when its four band-power
//! features are shuffled jointly across subjects. Negative drops are clipped
//! to zero and the scores are normalised to sum to one.

use crate::corpus::PRESET_RANKED_16;
use crate::model::{ModelError, Predictor, SubjectTokens};
use crate::rng;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Smallest evaluation set accepted by [`rank_channels`].
pub const MIN_EVAL_SUBJECTS: usize = 5;
/// Smallest number of permutation repetitions.
pub const MIN_REPETITIONS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("the reference model has not been trained")]
    Untrained,
    #[error("evaluation set has {0} subjects; at least {MIN_EVAL_SUBJECTS} are needed")]
    TooFewSubjects(usize),
    #[error("{0} repetitions requested; at least {MIN_REPETITIONS} are needed")]
    TooFewRepetitions(usize),
    #[error("inputs carry no signal tokens or disagree with the channel list: {0}")]
    Inputs(String),
    #[error("channel {0} is not in the montage")]
    UnknownChannel(String),
    #[error("asked for {k} channels, only {available} available")]
    TooMany { k: usize, available: usize },
    #[error("a computed subset needs an importance report")]
    MissingReport,
    #[error("unknown channel preset {0:?}; valid presets: all, paper16, paper8, paper4, computed:K")]
    UnknownPreset(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("importance csv: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SelectionError>;

/// Permutation-importance scores, one per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Channels in token order.
    pub channels: Vec<String>,
    /// Normalised scores aligned with `channels`; nonnegative, summing to 1.
    pub scores: Vec<f64>,
    /// Mean accuracy drop per channel before clipping and normalisation.
    pub mean_drop: Vec<f64>,
    /// Indices into `channels`, highest score first.
    pub order: Vec<usize>,
    pub baseline_accuracy: f64,
    pub repetitions: usize,
    pub seed: u64,
    /// No channel lowered accuracy, so every channel got the same share.
    pub uniform_fallback: bool,
}

impl ImportanceReport {
    /// `(channel, score, rank)` rows, rank 1 first.
    pub fn ranked(&self) -> Vec<(String, f64, usize)> {
        self.order.iter().enumerate().map(|(r, &i)| (self.channels[i].clone(), self.scores[i], r + 1)).collect()
    }

    pub fn top(&self, k: usize) -> Vec<String> {
        self.order.iter().take(k).map(|&i| self.channels[i].clone()).collect()
    }

    /// Writes `channel,score,rank`, highest score first.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "channel,score,rank")?;
        for (ch, score, rank) in self.ranked() {
            writeln!(w, "{ch},{score:.12},{rank}")?;
        }
        Ok(())
    }
}

fn accuracy(preds: &[u8], labels: &[u8]) -> f64 {
    preds.iter().zip(labels).filter(|(p, l)| p == l).count() as f64 / labels.len() as f64
}

/// Replaces token row `channel` of every subject with that of subject `perm[i]`.
fn permute_channel(inputs: &[SubjectTokens], channel: usize, perm: &[usize]) -> Vec<SubjectTokens> {
    let mut out = inputs.to_vec();
    for (dst, &src) in out.iter_mut().zip(perm) {
        let from = inputs[src].signal.as_ref().expect("checked").tokens.row(channel).to_vec();
        let seq = dst.signal.as_mut().expect("checked");
        let cols = seq.tokens.cols();
        seq.tokens.data_mut()[channel * cols..(channel + 1) * cols].copy_from_slice(&from);
    }
    out
}

/// Permutation importance of each signal channel for `model` on `inputs`.
///
/// Every `(channel, repetition)` pair draws its own permutation from a named
/// stream, so the result does not depend on evaluation order or thread count.
pub fn rank_channels<P: Predictor + Sync>(
    model: &P,
    inputs: &[SubjectTokens],
    labels: &[u8],
    channels: &[String],
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if !model.is_fitted() {
        return Err(SelectionError::Untrained);
    }
    if inputs.len() < MIN_EVAL_SUBJECTS {
        return Err(SelectionError::TooFewSubjects(inputs.len()));
    }
    if repetitions < MIN_REPETITIONS {
        return Err(SelectionError::TooFewRepetitions(repetitions));
    }
    if labels.len() != inputs.len() {
        return Err(SelectionError::Inputs(format!("{} labels for {} subjects", labels.len(), inputs.len())));
    }
    for s in inputs {
        match &s.signal {
            Some(seq) if seq.len() == channels.len() => {}
            Some(seq) => {
                return Err(SelectionError::Inputs(format!("{} tokens vs {} channels", seq.len(), channels.len())))
            }
            None => return Err(SelectionError::Inputs("missing signal sequence".into())),
        }
    }
    let baseline = accuracy(&model.predict(inputs)?, labels);
    let drops: Vec<f64> = (0..channels.len())
        .into_par_iter()
        .map(|c| -> Result<f64> {
            let mut total = 0.0;
            for r in 0..repetitions {
                let mut perm: Vec<usize> = (0..inputs.len()).collect();
                perm.shuffle(&mut rng::stream(seed, &format!("importance/{c}/{r}")));
                let permuted = permute_channel(inputs, c, &perm);
                total += baseline - accuracy(&model.predict(&permuted)?, labels);
            }
            Ok(total / repetitions as f64)
        })
        .collect::<Result<_>>()?;
    let clipped: Vec<f64> = drops.iter().map(|d| d.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    let uniform_fallback = sum <= 0.0;
    let scores: Vec<f64> = if uniform_fallback {
        vec![1.0 / channels.len() as f64; channels.len()]
    } else {
        clipped.iter().map(|c| c / sum).collect()
    };
    let mut order: Vec<usize> = (0..channels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(ImportanceReport {
        channels: channels.to_vec(),
        scores,
        mean_drop: drops,
        order,
        baseline_accuracy: baseline,
        repetitions,
        seed,
        uniform_fallback,
    })
}

/// Where a channel subset comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetSource {
    PaperPreset16,
    PaperPreset8,
    PaperPreset4,
    Computed,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSubset {
    /// Most important first; canonical montage order for `All`.
    pub channels: Vec<String>,
    pub source: SubsetSource,
}

impl ChannelSubset {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
}

/// Builds a subset of `montage`. `k` is only read for [`SubsetSource::Computed`].
pub fn select_subset(
    source: SubsetSource,
    k: usize,
    report: Option<&ImportanceReport>,
    montage: &[String],
) -> Result<ChannelSubset> {
    let preset = |n: usize| -> Result<Vec<String>> {
        PRESET_RANKED_16[..n]
            .iter()
            .map(|c| {
                if montage.iter().any(|m| m == c) {
                    Ok(c.to_string())
                } else {
                    Err(SelectionError::UnknownChannel(c.to_string()))
                }
            })
            .collect()
    };
    let channels = match source {
        SubsetSource::PaperPreset16 => preset(16)?,
        SubsetSource::PaperPreset8 => preset(8)?,
        SubsetSource::PaperPreset4 => preset(4)?,
        SubsetSource::All => montage.to_vec(),
        SubsetSource::Computed => {
            let report = report.ok_or(SelectionError::MissingReport)?;
            if k == 0 || k > report.channels.len() {
                return Err(SelectionError::TooMany { k, available: report.channels.len() });
            }
            let top = report.top(k);
            if let Some(c) = top.iter().find(|c| !montage.contains(c)) {
                return Err(SelectionError::UnknownChannel(c.clone()));
            }
            top
        }
    };
    Ok(ChannelSubset { channels, source })
}

/// Parsed form of a `--channels` argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSpec {
    All,
    Paper16,
    Paper8,
    Paper4,
    Computed(usize),
}

impl ChannelSpec {
    pub fn source(self) -> (SubsetSource, usize) {
        match self {
            ChannelSpec::All => (SubsetSource::All, 0),
            ChannelSpec::Paper16 => (SubsetSource::PaperPreset16, 16),
            ChannelSpec::Paper8 => (SubsetSource::PaperPreset8, 8),
            ChannelSpec::Paper4 => (SubsetSource::PaperPreset4, 4),
            ChannelSpec::Computed(k) => (SubsetSource::Computed, k),
        }
    }
}

impl std::str::FromStr for ChannelSpec {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "all" => Ok(ChannelSpec::All),
            "paper16" => Ok(ChannelSpec::Paper16),
            "paper8" => Ok(ChannelSpec::Paper8),
            "paper4" => Ok(ChannelSpec::Paper4),
            _ => lower
                .strip_prefix("computed:")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k > 0)
                .map(ChannelSpec::Computed)
                .ok_or_else(|| SelectionError::UnknownPreset(s.to_string())),
        }
    }
}

impl std::fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ChannelSpec::All => f.write_str("all"),
            ChannelSpec::Paper16 => f.write_str("paper16"),
            ChannelSpec::Paper8 => f.write_str("paper8"),
            ChannelSpec::Paper4 => f.write_str("paper4"),
            ChannelSpec::Computed(k) => write!(f, "computed:{k}"),
        }
    }
}

impl Serialize for ChannelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChannelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Signal-only inputs built from per-subject rows of channel band powers.
pub fn signal_tokens(rows: &[Vec<[f64; 4]>]) -> Result<Vec<SubjectTokens>> {
    rows.iter()
        .map(|r| {
            let data: Vec<f64> = r.iter().flatten().copied().collect();
            let t = Tensor::new(vec![r.len(), 4], data).map_err(ModelError::from)?;
            Ok(SubjectTokens {
                signal: Some(crate::model::TokenSequence::new(t, crate::model::TokenKind::Signal)?),
                descriptive: None,
            })
        })
        .collect()
}
