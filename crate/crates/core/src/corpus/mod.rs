//! Cohort data model: participants, manifests, signal files, labels,
//! descriptive-variable encoding, the train/test split, and a synthetic
//! cohort generator.

mod descriptive;
mod manifest;
mod montage;
mod signal;
mod split;
mod synth;

pub use descriptive::{encode_descriptives, DescriptiveStats, DescriptiveVector, Variable, N_DESCRIPTIVE};
pub use manifest::{load_manifest, save_manifest, CohortManifest, MANIFEST_VERSION};
pub use montage::{standard_63, PRESET_RANKED_16};
pub use signal::{load_recording, read_signal, write_signal, Recording, SignalMatrix, SIGNAL_MAGIC};
pub use split::{split_train_test, SplitIndices};
pub use synth::{generate_synthetic_cohort, BandSignature, GroupDemographics, Normal, SyntheticCohort, SyntheticSpec};

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed manifest: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("unsupported manifest format_version {0}")]
    Version(u32),
    #[error("duplicate participant id {0}")]
    DuplicateId(String),
    #[error("participant {id}: signal file {path} not found")]
    MissingSignalFile { id: String, path: PathBuf },
    #[error("manifest lists no channels")]
    EmptyChannels,
    #[error("duplicate channel {0}")]
    DuplicateChannel(String),
    #[error("participant {id}: {reason}")]
    InvalidRecord { id: String, reason: String },
    #[error("unknown participant id {0}")]
    UnknownId(String),
    #[error("{path}: not a signal file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: truncated, header promises {expected} bytes of samples, found {found}")]
    Truncated { path: PathBuf, expected: u64, found: u64 },
    #[error("{path}: header has {header} channels, manifest lists {manifest}")]
    ChannelMismatch { path: PathBuf, header: usize, manifest: usize },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("split ratio {0} outside (0, 1)")]
    InvalidRatio(f64),
    #[error("no participants with label {0}")]
    EmptyClass(u8),
    #[error("degenerate descriptive variable {0}: zero variance or no values in training split")]
    DegenerateVariable(Variable),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

/// Clinical group of a participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "HC")]
    HealthyControl,
    #[serde(rename = "PDFOG-")]
    PdFogMinus,
    #[serde(rename = "PDFOG+")]
    PdFogPlus,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::HealthyControl, Group::PdFogMinus, Group::PdFogPlus];

    /// Binary FOG label: 1 for PDFOG+, 0 otherwise.
    pub fn label(self) -> u8 {
        u8::from(self == Group::PdFogPlus)
    }

    pub fn code(self) -> &'static str {
        match self {
            Group::HealthyControl => "HC",
            Group::PdFogMinus => "PDFOG-",
            Group::PdFogPlus => "PDFOG+",
        }
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// One participant. Only objective descriptive variables are carried; any
/// clinical scores present in a manifest are dropped at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub group: Group,
    /// Years.
    pub age: f64,
    /// Years of education.
    pub schooling: f64,
    /// Years since diagnosis; absent for healthy controls.
    pub disease_duration: Option<f64>,
}

impl ParticipantRecord {
    pub fn label(&self) -> u8 {
        self.group.label()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Err(CorpusError::InvalidRecord { id: self.id.clone(), reason: reason.into() });
        if self.id.is_empty() {
            return bad("empty id");
        }
        if !(self.age > 0.0) || !self.age.is_finite() {
            return bad("age must be positive");
        }
        if !(self.schooling >= 0.0) || !self.schooling.is_finite() {
            return bad("schooling must be nonnegative");
        }
        if let Some(d) = self.disease_duration {
            if !(d >= 0.0) || !d.is_finite() {
                return bad("disease duration must be nonnegative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: ParticipantRecord,
    pub label: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCohort {
    pub records: Vec<LabeledRecord>,
    pub n_negative: usize,
    pub n_positive: usize,
}

impl LabeledCohort {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledRecord> {
        self.records.iter().find(|r| r.record.id == id)
    }
}

/// HC and PDFOG- map to 0, PDFOG+ to 1.
pub fn annotate_labels(participants: &[ParticipantRecord]) -> LabeledCohort {
    let records: Vec<LabeledRecord> =
        participants.iter().map(|p| LabeledRecord { record: p.clone(), label: p.label() }).collect();
    let n_positive = records.iter().filter(|r| r.label == 1).count();
    LabeledCohort { n_negative: records.len() - n_positive, n_positive, records }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, group: Group) -> ParticipantRecord {
        let disease_duration = (group != Group::HealthyControl).then_some(4.0);
        ParticipantRecord { id: id.into(), group, age: 70.0, schooling: 15.0, disease_duration }
    }

    #[test]
    fn study_shaped_label_counts() {
        let mut ps = Vec::new();
        for (g, n) in [(Group::HealthyControl, 41), (Group::PdFogMinus, 41), (Group::PdFogPlus, 42)] {
            ps.extend((0..n).map(|i| rec(&format!("{g}-{i}"), g)));
        }
        let l = annotate_labels(&ps);
        assert_eq!((l.n_negative, l.n_positive), (82, 42));
        let again = annotate_labels(&l.records.iter().map(|r| r.record.clone()).collect::<Vec<_>>());
        assert_eq!(again, l);
    }

    #[test]
    fn single_control_and_empty() {
        let l = annotate_labels(&[rec("a", Group::HealthyControl)]);
        assert_eq!(l.records[0].label, 0);
        assert!(annotate_labels(&[]).is_empty());
    }

    #[test]
    fn group_codes_round_trip_through_json() {
        for g in Group::ALL {
            let s = serde_json::to_string(&g).unwrap();
            assert_eq!(s, format!("\"{}\"", g.code()));
            assert_eq!(serde_json::from_str::<Group>(&s).unwrap(), g);
        }
    }
}
