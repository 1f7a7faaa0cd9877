use super::{ModelConfig, ModelError, Result, DESCRIPTIVE_FEATURES, N_BANDS};
use crate::corpus::DescriptiveVector;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TokenKind {
    /// One token per EEG channel, four band powers each.
    Signal,
    /// One token per descriptive variable: (z-scored value, presence flag).
    Descriptive,
}

impl TokenKind {
    pub fn feature_dim(self) -> usize {
        match self {
            TokenKind::Signal => N_BANDS,
            TokenKind::Descriptive => DESCRIPTIVE_FEATURES,
        }
    }
}

/// `[seq_len x feature_dim]` tokens. Row `i` sits at position `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Tensor,
    pub kind: TokenKind,
}

impl TokenSequence {
    pub fn new(tokens: Tensor, kind: TokenKind) -> Result<Self> {
        if tokens.shape().len() != 2 || tokens.cols() != kind.feature_dim() || tokens.rows() == 0 {
            return Err(ModelError::ShapeMismatch {
                name: format!("{kind:?} tokens"),
                expected: vec![tokens.rows().max(1), kind.feature_dim()],
                found: tokens.shape().to_vec(),
            });
        }
        Ok(Self { tokens, kind })
    }

    pub fn len(&self) -> usize {
        self.tokens.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positions(&self) -> std::ops::Range<usize> {
        0..self.len()
    }
}

/// Model input for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectTokens {
    pub signal: Option<TokenSequence>,
    pub descriptive: Option<TokenSequence>,
}

impl SubjectTokens {
    pub fn sequence(&self, kind: TokenKind) -> Option<&TokenSequence> {
        match kind {
            TokenKind::Signal => self.signal.as_ref(),
            TokenKind::Descriptive => self.descriptive.as_ref(),
        }
    }
}

/// Builds the token sequences required by `cfg.modality`.
///
/// `channels` and `row` are one subject's normalised feature row in the
/// cohort's canonical channel order. Signal tokens keep that order, filtered
/// to `cfg.channel_subset`.
pub fn tokenize(
    channels: &[String],
    row: &[[f64; 4]],
    dv: &DescriptiveVector,
    cfg: &ModelConfig,
) -> Result<SubjectTokens> {
    let signal = if cfg.modality.uses_signal() {
        if let Some(missing) = cfg.channel_subset.iter().find(|c| !channels.contains(c)) {
            return Err(ModelError::MissingChannel(missing.clone()));
        }
        if row.len() != channels.len() {
            return Err(ModelError::ShapeMismatch {
                name: "feature row".into(),
                expected: vec![channels.len(), N_BANDS],
                found: vec![row.len(), N_BANDS],
            });
        }
        let data: Vec<f64> = channels
            .iter()
            .zip(row)
            .filter(|(c, _)| cfg.channel_subset.contains(c))
            .flat_map(|(_, bands)| bands.iter().copied())
            .collect();
        let l = data.len() / N_BANDS;
        Some(TokenSequence::new(Tensor::new(vec![l, N_BANDS], data)?, TokenKind::Signal)?)
    } else {
        None
    };
    let descriptive = if cfg.modality.uses_descriptive() {
        let data: Vec<f64> = dv.values.iter().zip(&dv.present_mask).flat_map(|(&v, &m)| [v, m]).collect();
        let l = dv.values.len();
        Some(TokenSequence::new(Tensor::new(vec![l, DESCRIPTIVE_FEATURES], data)?, TokenKind::Descriptive)?)
    } else {
        None
    };
    Ok(SubjectTokens { signal, descriptive })
}
