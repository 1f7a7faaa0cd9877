//! Multitaper spectral estimation and EEG band-power features.

mod dpss;
mod features;
mod psd;

pub use dpss::{compute_dpss, concentration, slepian_tridiagonal, TaperSet};
pub use features::{
    extract_features, normalize_features, BandPowerTable, FeatureExtractor, NormalizedFeatures, SpectralParams, LOG_EPS,
};
pub use psd::{band_power, integrate, multitaper_psd, MultitaperEstimator, PsdEstimate};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("{0}")]
    Invalid(String),
    #[error("window length {window} does not match taper length {taper}")]
    LengthMismatch { window: usize, taper: usize },
    #[error("band [{lo}, {hi}) Hz outside the spectrum [0, {nyquist}] Hz")]
    BandOutOfRange { lo: f64, hi: f64, nyquist: f64 },
    #[error("non-finite sample in window")]
    NonFinite,
    #[error("recording has {samples} samples, fewer than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("subject {subject}, channel {channel}: training band power must be positive")]
    NonPositivePower { subject: String, channel: String },
    #[error("zero training variance for channel {channel}, band {band}")]
    DegenerateFeature { channel: String, band: Band },
    #[error("unknown subject {0}")]
    UnknownSubject(String),
    #[error("unknown channel {0}")]
    UnknownChannel(String),
    #[error("feature table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Theta = 0,
    Alpha = 1,
    Beta = 2,
    Gamma = 3,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Frequency band `[f_lo, f_hi)` in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDef {
    pub band: Band,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl BandDef {
    /// theta 4-8, alpha 8-13, beta 13-30, gamma 30-100 Hz; contiguous over [4, 100).
    pub fn standard() -> [BandDef; 4] {
        [
            BandDef { band: Band::Theta, f_lo: 4.0, f_hi: 8.0 },
            BandDef { band: Band::Alpha, f_lo: 8.0, f_hi: 13.0 },
            BandDef { band: Band::Beta, f_lo: 13.0, f_hi: 30.0 },
            BandDef { band: Band::Gamma, f_lo: 30.0, f_hi: 100.0 },
        ]
    }
}
