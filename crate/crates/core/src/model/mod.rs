//! The dual-pathway self-attention classifier.
//!
//! Seven stages run in order: input tokens, linear embedding, sinusoidal
//! positional encoding, one attention block per pathway, average pooling,
//! dropout and a dense two-class head. The two pathways ("temporal" and
//! "contextual") have independent weights. In multi-modal mode the temporal
//! pathway reads the EEG channel tokens and the contextual pathway reads the
//! descriptive tokens; in the unimodal modes both read the same sequence.

mod checkpoint;
mod network;
mod tokens;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use network::{
    attention_block, bisam_forward, embed, init_weights, param_shapes, positional_encode, positional_encoding,
    AttentionOutput, Bisam, ForwardOutput, Predictor, Stage, PATHWAYS,
};
pub use tokens::{tokenize, SubjectTokens, TokenKind, TokenSequence};

use crate::corpus::N_DESCRIPTIVE;
use crate::tensor::TensorError;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Band powers per EEG channel token.
pub const N_BANDS: usize = 4;
/// Features per descriptive token: z-scored value and presence flag.
pub const DESCRIPTIVE_FEATURES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("channel {0} missing from the feature table")]
    MissingChannel(String),
    #[error("inputs do not match modality {0}")]
    Modality(Modality),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed checkpoint: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("unsupported checkpoint format_version {0}")]
    Version(u32),
    #[error("shape mismatch for {name}: expected {expected:?}, found {found:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint does not match the requested model: {0}")]
    ConfigMismatch(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Which inputs the classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "eeg", alias = "signal_only")]
    SignalOnly,
    #[serde(rename = "dv", alias = "descriptive_only")]
    DescriptiveOnly,
    #[serde(rename = "multimodal", alias = "multi_modal")]
    MultiModal,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::SignalOnly, Modality::DescriptiveOnly, Modality::MultiModal];

    pub fn code(self) -> &'static str {
        match self {
            Modality::SignalOnly => "eeg",
            Modality::DescriptiveOnly => "dv",
            Modality::MultiModal => "multimodal",
        }
    }

    /// Row heading used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Modality::SignalOnly => "EEG Signals",
            Modality::DescriptiveOnly => "Descriptive Variables",
            Modality::MultiModal => "Multi-Modal",
        }
    }

    pub fn uses_signal(self) -> bool {
        self != Modality::DescriptiveOnly
    }

    pub fn uses_descriptive(self) -> bool {
        self != Modality::SignalOnly
    }

    /// Token kinds read by the temporal and contextual pathways.
    pub fn pathway_inputs(self) -> [TokenKind; 2] {
        match self {
            Modality::SignalOnly => [TokenKind::Signal, TokenKind::Signal],
            Modality::DescriptiveOnly => [TokenKind::Descriptive, TokenKind::Descriptive],
            Modality::MultiModal => [TokenKind::Signal, TokenKind::Descriptive],
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eeg" | "signal" | "signal_only" => Ok(Modality::SignalOnly),
            "dv" | "descriptive" | "descriptive_only" => Ok(Modality::DescriptiveOnly),
            "multimodal" | "multi_modal" | "mm" => Ok(Modality::MultiModal),
            other => Err(format!("unknown modality {other:?}; expected one of eeg, dv, multimodal")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub p_drop: f64,
    pub modality: Modality,
    /// EEG channels fed to the model, most important first. Tokens are
    /// nonetheless ordered by the cohort's canonical channel order.
    pub channel_subset: Vec<String>,
    pub n_bands: usize,
    pub n_descriptive: usize,
    /// Diagnostic switch; when false the encoding stage is the identity.
    pub positional_encoding: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 32,
            n_heads: 4,
            d_ff: 64,
            p_drop: 0.2,
            modality: Modality::MultiModal,
            channel_subset: Vec::new(),
            n_bands: N_BANDS,
            n_descriptive: N_DESCRIPTIVE,
            positional_encoding: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d_model == 0 || self.n_heads == 0 || self.d_ff == 0 {
            return bad("d_model, n_heads and d_ff must be positive".into());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads));
        }
        if self.d_model < 2 {
            return bad("d_model must be at least 2 for layer normalisation".into());
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return bad(format!("dropout rate {} outside [0, 1)", self.p_drop));
        }
        if self.n_bands != N_BANDS || self.n_descriptive != N_DESCRIPTIVE {
            return bad(format!("token widths are fixed at {N_BANDS} bands and {N_DESCRIPTIVE} descriptive variables"));
        }
        if self.modality.uses_signal() && self.channel_subset.is_empty() {
            return bad("signal modalities need at least one channel".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.channel_subset.iter().find(|c| !seen.insert(*c)) {
            return bad(format!("channel {dup} listed twice"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    /// Sequence length seen by a pathway reading tokens of `kind`.
    pub fn seq_len(&self, kind: TokenKind) -> usize {
        match kind {
            TokenKind::Signal => self.channel_subset.len(),
            TokenKind::Descriptive => self.n_descriptive,
        }
    }

    /// Short name such as `BiSAM-8` or `BiSAM-DV`.
    pub fn name(&self) -> String {
        match self.modality {
            Modality::DescriptiveOnly => "BiSAM-DV".into(),
            _ => format!("BiSAM-{}", self.channel_subset.len()),
        }
    }
}
