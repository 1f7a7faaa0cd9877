//! Helpers shared by the integration tests.
#![allow(dead_code)]

use bisam::corpus::{ParticipantRecord, SyntheticCohort, SyntheticSpec, PRESET_RANKED_16};
use bisam::model::{bisam_forward, Bisam, Modality, ModelConfig, SubjectTokens, TokenKind, TokenSequence};
use bisam::pipeline::{prepare_cohort, synthetic_features};
use bisam::rng::{self, StreamRng};
use bisam::spectral::SpectralParams;
use bisam::stats::ConfusionMatrix;
use bisam::tensor::{Mode, Tape, Tensor};
use bisam::trainer::PreparedCohort;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn preset8() -> Vec<String> {
    PRESET_RANKED_16[..8].iter().map(|s| s.to_string()).collect()
}

/// Random tokens; descriptive presence flags are 0 or 1.
pub fn random_tokens(r: &mut StreamRng, n_signal: usize) -> SubjectTokens {
    let sig: Vec<f64> = (0..n_signal * 4).map(|_| r.random_range(-2.0..2.0)).collect();
    let dv: Vec<f64> = (0..6)
        .map(|i| if i % 2 == 1 { f64::from(u8::from(r.random_bool(0.8))) } else { r.random_range(-2.0..2.0) })
        .collect();
    SubjectTokens {
        signal: Some(TokenSequence::new(Tensor::new(vec![n_signal, 4], sig).unwrap(), TokenKind::Signal).unwrap()),
        descriptive: Some(TokenSequence::new(Tensor::new(vec![3, 2], dv).unwrap(), TokenKind::Descriptive).unwrap()),
    }
}

pub fn config(modality: Modality, n_channels: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        modality,
        channel_subset: if modality == Modality::DescriptiveOnly {
            vec![]
        } else {
            (0..n_channels).map(|i| format!("C{i}")).collect()
        },
        seed,
        ..ModelConfig::default()
    }
}

/// Weighted cross-entropy of a train-mode forward pass whose dropout masks
/// come from a fixed stream, so repeated evaluations see the same masks.
fn loss(
    model: &Bisam,
    batch: &[SubjectTokens],
    labels: &[usize],
    want_grads: bool,
) -> (f64, Option<bisam::tensor::Grads>) {
    let mut tape = Tape::new();
    let bound = tape.bind(&model.params);
    let refs: Vec<&SubjectTokens> = batch.iter().collect();
    let mut drop = rng::stream(99, "gradcheck/dropout");
    let out = bisam_forward(&mut tape, &bound, &model.config, &refs, Mode::Train, &mut drop).unwrap();
    let l = tape.cross_entropy(out.logits, labels, Some(&[0.75, 1.5])).unwrap();
    let value = tape.value(l).data()[0];
    if !want_grads {
        return (value, None);
    }
    tape.backward(l).unwrap();
    (value, Some(tape.collect_grads(&bound)))
}

/// Largest relative difference between analytic gradients and central
/// differences over every parameter entry of a multimodal model with eight
/// signal tokens and three descriptive tokens.
pub fn bisam_gradcheck(seed: u64) -> (f64, usize) {
    let cfg = config(Modality::MultiModal, 8, seed);
    let mut model = Bisam::new(cfg).unwrap();
    let mut r = rng::stream(seed, "gradcheck/data");
    // Nonzero biases and gains so every parameter path is exercised.
    for (_, t) in model.params.iter_mut() {
        for v in t.data_mut() {
            *v += r.random_range(-0.1..0.1);
        }
    }
    let batch: Vec<SubjectTokens> = (0..3).map(|_| random_tokens(&mut r, 8)).collect();
    let labels = [0usize, 1, 1];
    let grads = loss(&model, &batch, &labels, true).1.unwrap();
    let h = 1e-5;
    let names: Vec<String> = model.params.names().cloned().collect();
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for name in names {
        let n = model.params.get(&name).unwrap().len();
        for i in 0..n {
            let orig = model.params.get(&name).unwrap().data()[i];
            model.params.get_mut(&name).unwrap().data_mut()[i] = orig + h;
            let up = loss(&model, &batch, &labels, false).0;
            model.params.get_mut(&name).unwrap().data_mut()[i] = orig - h;
            let down = loss(&model, &batch, &labels, false).0;
            model.params.get_mut(&name).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[&name].data()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

/// The default synthetic cohort restricted to `channels`, prepared with the
/// standard 0.8 split.
pub fn prepared_synthetic(
    spec: &SyntheticSpec,
    channels: Option<&[String]>,
    seed: u64,
) -> (SyntheticCohort, PreparedCohort) {
    let cohort = SyntheticCohort::generate(spec, seed).unwrap();
    let table = synthetic_features(&cohort, channels, &SpectralParams::default()).unwrap();
    let data = prepare_cohort(&table, &cohort.participants, 0.8, seed).unwrap();
    (cohort, data)
}

/// `n` participants alternating over the three groups, with plausible demographics.
pub fn participants(n: usize) -> Vec<ParticipantRecord> {
    use bisam::corpus::Group;
    (0..n)
        .map(|i| {
            let group = Group::ALL[i % 3];
            ParticipantRecord {
                id: format!("p{i:03}"),
                group,
                age: 60.0 + (i % 17) as f64,
                schooling: 8.0 + (i % 7) as f64,
                disease_duration: (group != Group::HealthyControl).then_some(2.0 + (i % 11) as f64),
            }
        })
        .collect()
}

/// Standard normal samples from a named stream.
pub fn white(seed: u64, label: &str, n: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, label);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// Eval-mode forward pass, keeping the tape for inspection.
pub fn forward_eval(model: &Bisam, batch: &[SubjectTokens]) -> (Tape, bisam::model::ForwardOutput) {
    let mut tape = Tape::new();
    let bound = tape.bind(&model.params);
    let refs: Vec<&SubjectTokens> = batch.iter().collect();
    let mut r = rng::stream(0, "unused");
    let out = bisam_forward(&mut tape, &bound, &model.config, &refs, Mode::Eval, &mut r).unwrap();
    (tape, out)
}

/// `s` with its signal tokens reordered by `perm`.
pub fn permute_signal(s: &SubjectTokens, perm: &[usize]) -> SubjectTokens {
    let t = &s.signal.as_ref().unwrap().tokens;
    let data: Vec<f64> = perm.iter().flat_map(|&i| t.row(i).to_vec()).collect();
    SubjectTokens {
        signal: Some(TokenSequence::new(Tensor::new(vec![perm.len(), 4], data).unwrap(), TokenKind::Signal).unwrap()),
        descriptive: s.descriptive.clone(),
    }
}

/// Element-wise reference: expands the matrix into label and prediction
/// vectors and counts agreement directly.
pub struct ReferenceMetrics {
    pub accuracy: f64,
    pub precision: [f64; 2],
    pub recall: [f64; 2],
    pub f1: [f64; 2],
    pub kappa: f64,
}

pub fn reference_metrics(cm: &ConfusionMatrix) -> ReferenceMetrics {
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for (l, p, count) in [(1u8, 1u8, cm.tp), (1, 0, cm.fn_), (0, 1, cm.fp), (0, 0, cm.tn)] {
        for _ in 0..count {
            labels.push(l);
            preds.push(p);
        }
    }
    let n = labels.len() as f64;
    let count = |f: &dyn Fn(u8, u8) -> bool| labels.iter().zip(&preds).filter(|(l, p)| f(**l, **p)).count() as f64;
    let safe = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut precision = [0.0; 2];
    let mut recall = [0.0; 2];
    let mut f1 = [0.0; 2];
    for c in 0..2u8 {
        let hit = count(&|l, p| l == c && p == c);
        let predicted = count(&|_, p| p == c);
        let actual = count(&|l, _| l == c);
        let (p, r) = (safe(hit, predicted), safe(hit, actual));
        precision[c as usize] = p;
        recall[c as usize] = r;
        f1[c as usize] = safe(2.0 * p * r, p + r);
    }
    let po = count(&|l, p| l == p) / n;
    let pe = (0..2u8).map(|c| (count(&|l, _| l == c) / n) * (count(&|_, p| p == c) / n)).sum::<f64>();
    let kappa = if (1.0 - pe).abs() < 1e-15 {
        if po == 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (po - pe) / (1.0 - pe)
    };
    ReferenceMetrics { accuracy: po, precision, recall, f1, kappa }
}

/// Rank by counting: smaller values plus half the other ties, plus one.
fn counting_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn reference_spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (counting_ranks(x), counting_ranks(y));
    let n = x.len() as f64;
    let (sx, sy) = (rx.iter().sum::<f64>(), ry.iter().sum::<f64>());
    let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - sx / n) * (b - sy / n)).sum();
    let sxx: f64 = rx.iter().map(|a| (a - sx / n).powi(2)).sum();
    let syy: f64 = ry.iter().map(|b| (b - sy / n).powi(2)).sum();
    sxy / sxx.sqrt() / syy.sqrt()
}
