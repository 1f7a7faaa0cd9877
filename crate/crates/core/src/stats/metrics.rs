use super::StatsError;
use serde::{Deserialize, Serialize};

/// Binary confusion counts; the positive class is label 1 (FOG+).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fn_: u64, fp: u64, tn: u64) -> Self {
        Self { tp, fn_, fp, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

pub fn confusion(labels: &[u8], preds: &[u8]) -> Result<ConfusionMatrix, StatsError> {
    if labels.len() != preds.len() {
        return Err(StatsError::LengthMismatch(labels.len(), preds.len()));
    }
    if labels.is_empty() {
        return Err(StatsError::TooShort { min: 1, got: 0 });
    }
    let mut cm = ConfusionMatrix::default();
    for (&l, &p) in labels.iter().zip(preds) {
        match (l, p) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fn_ += 1,
            (0, 1) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (1 | 0, bad) | (bad, _) => return Err(StatsError::NotBinary(bad)),
        }
    }
    Ok(cm)
}

/// How precision/recall/F1 are summarised in [`MetricReport::headline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    BinaryPositive,
    Macro,
}

/// Cohen's kappa with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub kappa: f64,
    pub p_o: f64,
    pub p_e: f64,
    /// Chance agreement was 1, so the ratio is undefined.
    pub degenerate: bool,
}

/// Chance-corrected agreement `(p_o - p_e) / (1 - p_e)`.
///
/// Numerator and denominator are formed in integer arithmetic, so a constant
/// predictor yields exactly 0.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Kappa {
    let n = cm.total() as u128;
    assert!(n > 0, "confusion matrix must be nonempty");
    let agree = (cm.tp + cm.tn) as u128;
    let pred_pos = (cm.tp + cm.fp) as u128;
    let pred_neg = (cm.fn_ + cm.tn) as u128;
    let true_pos = (cm.tp + cm.fn_) as u128;
    let true_neg = (cm.fp + cm.tn) as u128;
    let chance = pred_pos * true_pos + pred_neg * true_neg;
    let p_o = agree as f64 / n as f64;
    let p_e = chance as f64 / (n * n) as f64;
    if chance == n * n {
        let kappa = if agree == n { 1.0 } else { 0.0 };
        return Kappa { kappa, p_o, p_e, degenerate: true };
    }
    let num = (n * agree) as i128 - chance as i128;
    let den = (n * n - chance) as i128;
    Kappa { kappa: num as f64 / den as f64, p_o, p_e, degenerate: false }
}

/// Full evaluation summary. Serialises to the flat metrics JSON layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_pos: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub kappa: f64,
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
    #[serde(skip)]
    pub p_o: f64,
    #[serde(skip)]
    pub p_e: f64,
    #[serde(skip, default = "default_averaging")]
    pub averaging: Averaging,
}

fn default_averaging() -> Averaging {
    Averaging::BinaryPositive
}

impl MetricReport {
    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix::new(self.tp, self.fn_, self.fp, self.tn)
    }

    /// (precision, recall, f1) under the report's averaging.
    pub fn headline(&self) -> (f64, f64, f64) {
        match self.averaging {
            Averaging::BinaryPositive => (self.precision_pos, self.recall_pos, self.f1_pos),
            Averaging::Macro => (self.precision_macro, self.recall_macro, self.f1_macro),
        }
    }
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64, degenerate: &mut bool) -> f64 {
    if p + r == 0.0 {
        *degenerate = true;
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy, per-class and macro precision/recall/F1, and kappa.
/// Both averagings are always filled in; `averaging` only picks the headline.
pub fn metrics(cm: &ConfusionMatrix, averaging: Averaging) -> MetricReport {
    let mut degenerate = false;
    let total = cm.total();
    assert!(total > 0, "confusion matrix must be nonempty");
    let accuracy = (cm.tp + cm.tn) as f64 / total as f64;

    let precision_pos = ratio(cm.tp, cm.tp + cm.fp, &mut degenerate);
    let recall_pos = ratio(cm.tp, cm.tp + cm.fn_, &mut degenerate);
    let f1_pos = f1(precision_pos, recall_pos, &mut degenerate);
    let precision_neg = ratio(cm.tn, cm.tn + cm.fn_, &mut degenerate);
    let recall_neg = ratio(cm.tn, cm.tn + cm.fp, &mut degenerate);
    let f1_neg = f1(precision_neg, recall_neg, &mut degenerate);

    let k = cohen_kappa(cm);
    MetricReport {
        accuracy,
        precision_pos,
        recall_pos,
        f1_pos,
        precision_macro: (precision_pos + precision_neg) / 2.0,
        recall_macro: (recall_pos + recall_neg) / 2.0,
        f1_macro: (f1_pos + f1_neg) / 2.0,
        kappa: k.kappa,
        tp: cm.tp,
        fn_: cm.fn_,
        fp: cm.fp,
        tn: cm.tn,
        degenerate: degenerate || k.degenerate,
        p_o: k.p_o,
        p_e: k.p_e,
        averaging,
    }
}
