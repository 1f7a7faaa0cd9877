//! Binary signal files: a 16-byte header (`BSIG`, u32 channel count, u64
//! sample count, little-endian) followed by row-major little-endian `f32`
//! samples, one row per channel.

use super::{CohortManifest, CorpusError, Result};
use std::io::Write;
use std::path::Path;

pub const SIGNAL_MAGIC: [u8; 4] = *b"BSIG";
const HEADER_LEN: usize = 16;

/// Raw `[n_channels x n_samples]` matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub n_channels: usize,
    pub n_samples: usize,
    pub data: Vec<f32>,
}

impl SignalMatrix {
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != n_channels * n_samples {
            return Err(CorpusError::InvalidRecording(format!("{} values for {n_channels} x {n_samples}", data.len())));
        }
        Ok(Self { n_channels, n_samples, data })
    }
}

pub fn write_signal(path: impl AsRef<Path>, m: &SignalMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * m.data.len());
    bytes.extend_from_slice(&SIGNAL_MAGIC);
    bytes.extend_from_slice(&(m.n_channels as u32).to_le_bytes());
    bytes.extend_from_slice(&(m.n_samples as u64).to_le_bytes());
    for v in &m.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let io = |source| CorpusError::Io { path: path.into(), source };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(&bytes).map_err(io)
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<SignalMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io { path: path.into(), source })?;
    if bytes.len() < HEADER_LEN || bytes[..4] != SIGNAL_MAGIC {
        return Err(CorpusError::BadMagic { path: path.into() });
    }
    let n_channels = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let n_samples = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let expected = (n_channels as u64).saturating_mul(n_samples).saturating_mul(4);
    let found = (bytes.len() - HEADER_LEN) as u64;
    if found != expected {
        return Err(CorpusError::Truncated { path: path.into(), expected, found });
    }
    let data =
        bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    SignalMatrix::new(n_channels, n_samples as usize, data)
}

/// A multichannel recording in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub channels: Vec<String>,
    pub fs: f64,
    pub n_samples: usize,
    /// Row-major `[channel][sample]`.
    pub samples: Vec<f32>,
}

impl Recording {
    /// Checks shape, minimum length (two seconds) and finiteness.
    pub fn new(channels: Vec<String>, fs: f64, matrix: SignalMatrix) -> Result<Self> {
        if matrix.n_channels != channels.len() {
            return Err(CorpusError::InvalidRecording(format!(
                "{} rows for {} channels",
                matrix.n_channels,
                channels.len()
            )));
        }
        if !(fs > 0.0) {
            return Err(CorpusError::InvalidRecording(format!("sampling rate {fs}")));
        }
        if (matrix.n_samples as f64) < 2.0 * fs {
            return Err(CorpusError::InvalidRecording(format!(
                "{} samples is shorter than two seconds at {fs} Hz",
                matrix.n_samples
            )));
        }
        if matrix.data.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::InvalidRecording("non-finite sample".into()));
        }
        Ok(Self { channels, fs, n_samples: matrix.n_samples, samples: matrix.data })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.samples[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.fs
    }

    pub fn to_matrix(&self) -> SignalMatrix {
        SignalMatrix { n_channels: self.n_channels(), n_samples: self.n_samples, data: self.samples.clone() }
    }
}

/// Loads the recording of participant `id` using the manifest's channel list and rate.
pub fn load_recording(manifest: &CohortManifest, id: &str) -> Result<Recording> {
    let path = manifest.signal_path(id)?;
    let m = read_signal(&path)?;
    if m.n_channels != manifest.channel_names.len() {
        return Err(CorpusError::ChannelMismatch {
            path,
            header: m.n_channels,
            manifest: manifest.channel_names.len(),
        });
    }
    Recording::new(manifest.channel_names.clone(), manifest.sampling_rate, m)
}
