//! JSON checkpoints: `{format_version, config, params: {name: {shape, data}}}`.
//! Floats are written in shortest round-trip form, so a reload reproduces
//! every weight bit for bit.

use super::{param_shapes, Bisam, ModelConfig, ModelError, Result};
use crate::tensor::{Params, Tensor};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct StoredTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config: ModelConfig,
    #[serde(default)]
    trained_steps: u64,
    params: BTreeMap<String, StoredTensor>,
}

pub fn save_checkpoint(model: &Bisam, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        config: model.config.clone(),
        trained_steps: model.trained_steps,
        params: model
            .params
            .iter()
            .map(|(n, t)| (n.clone(), StoredTensor { shape: t.shape().to_vec(), data: t.data().to_vec() }))
            .collect(),
    };
    let mut text = serde_json::to_string(&file).map_err(|source| ModelError::Parse { path: path.into(), source })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ModelError::Io { path: path.into(), source })
}

/// Loads a checkpoint. With `expected`, the stored architecture must match it
/// (the seed may differ).
pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<Bisam> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.into(), source })?;
    let mut file: CheckpointFile =
        serde_json::from_str(&text).map_err(|source| ModelError::Parse { path: path.into(), source })?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(ModelError::Version(file.format_version));
    }
    let config = file.config.clone();
    config.validate()?;
    if let Some(want) = expected {
        check_compatible(&config, want)?;
    }
    let shapes = param_shapes(&config);
    if shapes.len() != file.params.len() {
        return Err(ModelError::ConfigMismatch(format!(
            "{} stored tensors, architecture needs {}",
            file.params.len(),
            shapes.len()
        )));
    }
    let mut stored = std::mem::take(&mut file.params);
    let mut params = Params::new();
    for (name, shape) in shapes {
        let t = stored.remove(&name).ok_or_else(|| ModelError::ConfigMismatch(format!("missing tensor {name}")))?;
        if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
            return Err(ModelError::ShapeMismatch { name, expected: shape, found: t.shape });
        }
        params.insert(name, Tensor::new(t.shape, t.data)?);
    }
    Ok(Bisam { config, params, trained_steps: file.trained_steps })
}

fn check_compatible(have: &ModelConfig, want: &ModelConfig) -> Result<()> {
    if have.modality != want.modality {
        return Err(ModelError::ConfigMismatch(format!("modality {} vs {}", have.modality, want.modality)));
    }
    if have.modality.uses_signal() && have.channel_subset.len() != want.channel_subset.len() {
        return Err(ModelError::ShapeMismatch {
            name: "signal input".into(),
            expected: vec![want.channel_subset.len(), want.n_bands],
            found: vec![have.channel_subset.len(), have.n_bands],
        });
    }
    if have.modality.uses_signal() && have.channel_subset != want.channel_subset {
        return Err(ModelError::ConfigMismatch("different channel subset".into()));
    }
    let arch = |c: &ModelConfig| (c.d_model, c.n_heads, c.d_ff, c.positional_encoding);
    if arch(have) != arch(want) {
        return Err(ModelError::ConfigMismatch(format!(
            "(d_model, n_heads, d_ff, positional_encoding) {:?} vs {:?}",
            arch(have),
            arch(want)
        )));
    }
    Ok(())
}
