use super::{CorpusError, Group, ParticipantRecord, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

pub const MANIFEST_VERSION: u32 = 1;

/// On-disk layout of `manifest.json`.
#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    format_version: u32,
    sampling_rate_hz: f64,
    channel_names: Vec<String>,
    participants: Vec<ParticipantEntry>,
}

/// Unknown keys (e.g. clinical scores) are ignored on read.
#[derive(Debug, Serialize, Deserialize)]
struct ParticipantEntry {
    id: String,
    group: Group,
    age: f64,
    schooling: f64,
    disease_duration: Option<f64>,
    signal_file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortManifest {
    pub participants: Vec<ParticipantRecord>,
    pub sampling_rate: f64,
    /// Canonical channel order, shared by every recording.
    pub channel_names: Vec<String>,
    /// Participant id to signal file path, relative to `base_dir`.
    pub signal_file_map: BTreeMap<String, String>,
    pub format_version: u32,
    /// Directory the manifest was loaded from.
    pub base_dir: PathBuf,
}

impl CohortManifest {
    pub fn signal_path(&self, id: &str) -> Result<PathBuf> {
        let rel = self.signal_file_map.get(id).ok_or_else(|| CorpusError::UnknownId(id.to_string()))?;
        Ok(self.base_dir.join(rel))
    }

    pub fn participant(&self, id: &str) -> Option<&ParticipantRecord> {
        self.participants.iter().find(|p| p.id == id)
    }

    /// Structural invariants that do not touch the filesystem.
    pub fn validate_structure(&self) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(CorpusError::Version(self.format_version));
        }
        if self.channel_names.is_empty() {
            return Err(CorpusError::EmptyChannels);
        }
        let mut seen = HashSet::new();
        for ch in &self.channel_names {
            if !seen.insert(ch) {
                return Err(CorpusError::DuplicateChannel(ch.clone()));
            }
        }
        if !(self.sampling_rate > 0.0) || !self.sampling_rate.is_finite() {
            return Err(CorpusError::InvalidRecording(format!("sampling rate {}", self.sampling_rate)));
        }
        let mut ids = HashSet::new();
        for p in &self.participants {
            if !ids.insert(&p.id) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
            p.validate()?;
            if !self.signal_file_map.contains_key(&p.id) {
                return Err(CorpusError::InvalidRecord { id: p.id.clone(), reason: "no signal file".into() });
            }
        }
        if self.signal_file_map.len() != self.participants.len() {
            return Err(CorpusError::InvalidRecording("signal files listed for unknown participants".into()));
        }
        Ok(())
    }

    /// Structural invariants plus existence of every signal file.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        for p in &self.participants {
            let path = self.signal_path(&p.id)?;
            if !path.is_file() {
                return Err(CorpusError::MissingSignalFile { id: p.id.clone(), path });
            }
        }
        Ok(())
    }

    fn to_file(&self) -> ManifestFile {
        ManifestFile {
            format_version: self.format_version,
            sampling_rate_hz: self.sampling_rate,
            channel_names: self.channel_names.clone(),
            participants: self
                .participants
                .iter()
                .map(|p| ParticipantEntry {
                    id: p.id.clone(),
                    group: p.group,
                    age: p.age,
                    schooling: p.schooling,
                    disease_duration: p.disease_duration,
                    signal_file: self.signal_file_map[&p.id].clone(),
                })
                .collect(),
        }
    }
}

/// Reads and validates `manifest.json`; signal paths resolve relative to its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<CohortManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.into(), source })?;
    let file: ManifestFile =
        serde_json::from_str(&text).map_err(|source| CorpusError::Parse { path: path.into(), source })?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut signal_file_map = BTreeMap::new();
    let mut participants = Vec::with_capacity(file.participants.len());
    for e in file.participants {
        if signal_file_map.insert(e.id.clone(), e.signal_file).is_some() {
            return Err(CorpusError::DuplicateId(e.id));
        }
        participants.push(ParticipantRecord {
            id: e.id,
            group: e.group,
            age: e.age,
            schooling: e.schooling,
            disease_duration: e.disease_duration,
        });
    }
    let m = CohortManifest {
        participants,
        sampling_rate: file.sampling_rate_hz,
        channel_names: file.channel_names,
        signal_file_map,
        format_version: file.format_version,
        base_dir,
    };
    m.validate()?;
    Ok(m)
}

/// Writes the manifest as pretty-printed JSON.
pub fn save_manifest(manifest: &CohortManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate_structure()?;
    let mut text = serde_json::to_string_pretty(&manifest.to_file())
        .map_err(|source| CorpusError::Parse { path: path.into(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CorpusError::Io { path: path.into(), source })
}
