use crate::corpus::{
    encode_descriptives, CorpusError, DescriptiveStats, DescriptiveVector, LabeledCohort, SplitIndices,
};
use crate::model::{tokenize, ModelConfig, ModelError, SubjectTokens};
use crate::spectral::{normalize_features, BandPowerTable, SpectralError};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("subject {0} has no row in the feature table")]
    MissingFeatures(String),
    #[error("subject {0} is not in the cohort")]
    UnknownSubject(String),
}

/// One subject's model-ready inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub label: u8,
    /// Normalised band powers in canonical channel order.
    pub features: Vec<[f64; 4]>,
    pub descriptive: DescriptiveVector,
}

/// Normalised features and encoded descriptives for both sides of a split.
/// All statistics come from the training subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCohort {
    pub channels: Vec<String>,
    pub split: SplitIndices,
    pub train: Vec<Subject>,
    pub test: Vec<Subject>,
    pub descriptive_stats: DescriptiveStats,
}

impl PreparedCohort {
    pub fn prepare(table: &BandPowerTable, cohort: &LabeledCohort, split: SplitIndices) -> Result<Self, DataError> {
        for id in split.train_ids.iter().chain(&split.test_ids) {
            if table.subject_index(id).is_none() {
                return Err(DataError::MissingFeatures(id.clone()));
            }
        }
        let normalized = normalize_features(table, &split.train_ids)?;
        let record = |id: &String| cohort.get(id).ok_or_else(|| DataError::UnknownSubject(id.clone()));
        let train_records = split.train_ids.iter().map(record).collect::<Result<Vec<_>, _>>()?;
        let descriptive_stats = DescriptiveStats::fit(train_records.iter().map(|r| &r.record))?;
        let build = |ids: &[String]| -> Result<Vec<Subject>, DataError> {
            ids.iter()
                .map(|id| {
                    let r = record(id)?;
                    let row = normalized.subject_index(id).expect("checked above");
                    Ok(Subject {
                        id: id.clone(),
                        label: r.label,
                        features: normalized.row(row).to_vec(),
                        descriptive: encode_descriptives(&r.record, &descriptive_stats)?,
                    })
                })
                .collect()
        };
        Ok(Self {
            channels: table.channels().to_vec(),
            train: build(&split.train_ids)?,
            test: build(&split.test_ids)?,
            split,
            descriptive_stats,
        })
    }

    /// Model inputs and labels for `subjects` under `cfg`.
    pub fn inputs(&self, subjects: &[Subject], cfg: &ModelConfig) -> Result<(Vec<SubjectTokens>, Vec<u8>), ModelError> {
        let tokens = subjects
            .iter()
            .map(|s| tokenize(&self.channels, &s.features, &s.descriptive, cfg))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((tokens, subjects.iter().map(|s| s.label).collect()))
    }
}
