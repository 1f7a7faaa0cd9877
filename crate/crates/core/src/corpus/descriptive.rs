use super::{CorpusError, ParticipantRecord, Result};
use serde::{Deserialize, Serialize};

pub const N_DESCRIPTIVE: usize = 3;

/// The objective descriptive variables, in encoding order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Age,
    Schooling,
    DiseaseDuration,
}

impl Variable {
    pub const ALL: [Variable; N_DESCRIPTIVE] = [Variable::Age, Variable::Schooling, Variable::DiseaseDuration];

    pub fn of(self, r: &ParticipantRecord) -> Option<f64> {
        match self {
            Variable::Age => Some(r.age),
            Variable::Schooling => Some(r.schooling),
            Variable::DiseaseDuration => r.disease_duration,
        }
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variable::Age => "age",
            Variable::Schooling => "schooling",
            Variable::DiseaseDuration => "disease_duration",
        })
    }
}

/// Z-scored descriptive values with a presence mask. Missing slots hold 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveVector {
    pub values: [f64; N_DESCRIPTIVE],
    pub present_mask: [f64; N_DESCRIPTIVE],
}

/// Per-variable mean and population standard deviation over present values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: [f64; N_DESCRIPTIVE],
    pub std: [f64; N_DESCRIPTIVE],
}

impl DescriptiveStats {
    /// Fits on the given (training) records. A variable with no present
    /// values or zero spread is an error.
    pub fn fit<'a>(records: impl IntoIterator<Item = &'a ParticipantRecord>) -> Result<Self> {
        let records: Vec<&ParticipantRecord> = records.into_iter().collect();
        let mut mean = [0.0; N_DESCRIPTIVE];
        let mut std = [0.0; N_DESCRIPTIVE];
        for (i, var) in Variable::ALL.iter().enumerate() {
            let xs: Vec<f64> = records.iter().filter_map(|r| var.of(r)).collect();
            if xs.is_empty() {
                return Err(CorpusError::DegenerateVariable(*var));
            }
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
            if v <= 0.0 {
                return Err(CorpusError::DegenerateVariable(*var));
            }
            mean[i] = m;
            std[i] = v.sqrt();
        }
        Ok(Self { mean, std })
    }
}

pub fn encode_descriptives(record: &ParticipantRecord, stats: &DescriptiveStats) -> Result<DescriptiveVector> {
    let mut values = [0.0; N_DESCRIPTIVE];
    let mut present_mask = [0.0; N_DESCRIPTIVE];
    for (i, var) in Variable::ALL.iter().enumerate() {
        if !(stats.std[i] > 0.0) {
            return Err(CorpusError::DegenerateVariable(*var));
        }
        if let Some(x) = var.of(record) {
            values[i] = (x - stats.mean[i]) / stats.std[i];
            present_mask[i] = 1.0;
        }
    }
    Ok(DescriptiveVector { values, present_mask })
}
