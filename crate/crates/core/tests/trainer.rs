mod common;

use bisam::corpus::{SyntheticSpec, PRESET_RANKED_16};
use bisam::model::{Bisam, Modality, ModelConfig, Predictor, SubjectTokens};
use bisam::pipeline::matrix_subsets;
use bisam::rng;
use bisam::selection::{signal_tokens, ChannelSpec};
use bisam::tensor::Adam;
use bisam::trainer::{evaluate, run_matrix, train, ClassWeights, TrainConfig, TrainError};
use rand::Rng;

/// Ten subjects over two channels; class 1 has higher power on both.
fn separable() -> (Vec<SubjectTokens>, Vec<u8>) {
    let mut r = rng::stream(0, "toy");
    let labels: Vec<u8> = (0..10).map(|i| u8::from(i % 2 == 1)).collect();
    let rows: Vec<Vec<[f64; 4]>> = labels
        .iter()
        .map(|&l| {
            let centre = if l == 1 { 1.0 } else { -1.0 };
            (0..2).map(|_| [0; 4].map(|_: i32| centre + r.random_range(-0.3..0.3))).collect()
        })
        .collect();
    (signal_tokens(&rows).unwrap(), labels)
}

fn toy_model(seed: u64) -> Bisam {
    Bisam::new(common::config(Modality::SignalOnly, 2, seed)).unwrap()
}

#[test]
fn zero_learning_rate_leaves_weights_unchanged() {
    let (x, y) = separable();
    let mut model = toy_model(1);
    let before = model.params.clone();
    let cfg = TrainConfig { epochs: 1, adam: Adam { lr: 0.0, ..Adam::default() }, ..TrainConfig::default() };
    let log = train(&mut model, &x, &y, &cfg).unwrap();
    assert_eq!(log.epochs.len(), 1);
    assert_eq!(model.params, before);
}

#[test]
fn separable_toy_set_is_learned() {
    let (x, y) = separable();
    let mut model = toy_model(2);
    let cfg = TrainConfig { epochs: 200, seed: 3, ..TrainConfig::default() };
    let log = train(&mut model, &x, &y, &cfg).unwrap();
    let reached = log.epochs.iter().position(|e| e.accuracy == 1.0);
    assert!(reached.is_some(), "never reached 1.0 in training");
    let report = evaluate(&model, &x, &y).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert!(log.final_loss().unwrap() < log.epochs[0].loss);
}

#[test]
fn training_is_deterministic() {
    let (x, y) = separable();
    let cfg = TrainConfig { epochs: 15, seed: 4, batch_size: 3, ..TrainConfig::default() };
    let run = || {
        let mut m = toy_model(5);
        let log = train(&mut m, &x, &y, &cfg).unwrap();
        (m, log)
    };
    let (m1, l1) = run();
    let (m2, l2) = run();
    assert_eq!(m1, m2);
    assert_eq!(
        l1.epochs.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>(),
        l2.epochs.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>()
    );
    let mut m3 = toy_model(5);
    train(&mut m3, &x, &y, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(m1.params, m3.params);
}

#[test]
fn every_epoch_visits_each_subject_once() {
    let (x, y) = separable();
    let mut model = toy_model(7);
    let log = train(&mut model, &x, &y, &TrainConfig { epochs: 12, batch_size: 4, ..TrainConfig::default() }).unwrap();
    let orders: Vec<&Vec<usize>> = log.epochs.iter().map(|e| &e.order).collect();
    for order in &orders {
        let mut sorted = (*order).clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }
    assert!(orders.windows(2).any(|w| w[0] != w[1]), "order never changed");
}

#[test]
fn unit_class_weights_equal_unweighted_loss() {
    let (x, y) = separable();
    let run = |w| {
        let mut m = toy_model(8);
        let log =
            train(&mut m, &x, &y, &TrainConfig { epochs: 5, class_weights: w, ..TrainConfig::default() }).unwrap();
        (m.params, log.epochs.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(ClassWeights::Manual([1.0, 1.0])), run(ClassWeights::Uniform));
}

#[test]
fn invalid_configs_and_inputs_are_rejected() {
    let (x, y) = separable();
    let mut m = toy_model(9);
    assert!(matches!(train(&mut m, &[], &[], &TrainConfig::default()), Err(TrainError::EmptyTrainSet)));
    assert!(matches!(train(&mut m, &x, &y[..3], &TrainConfig::default()), Err(TrainError::LengthMismatch { .. })));
    assert!(matches!(
        train(&mut m, &x, &y, &TrainConfig { batch_size: 0, ..TrainConfig::default() }),
        Err(TrainError::Config(_))
    ));
    assert!(matches!(evaluate(&m, &[], &[]), Err(TrainError::EmptyTestSet)));
}

#[test]
fn huge_learning_rate_is_reported_as_divergence() {
    let (x, y) = separable();
    let mut m = toy_model(10);
    let cfg = TrainConfig { epochs: 50, adam: Adam { lr: 1e300, ..Adam::default() }, ..TrainConfig::default() };
    match train(&mut m, &x, &y, &cfg) {
        Err(e) => assert!(e.is_numerical(), "{e}"),
        Ok(log) => panic!("expected divergence, finished with loss {:?}", log.final_loss()),
    }
}

struct Fixed(Vec<u8>);

impl Predictor for Fixed {
    fn predict(&self, _inputs: &[SubjectTokens]) -> bisam::model::Result<Vec<u8>> {
        Ok(self.0.clone())
    }
}

#[test]
fn evaluation_of_reference_predictors() {
    let inputs = signal_tokens(&vec![vec![[0.0; 4]; 2]; 25]).unwrap();
    let labels: Vec<u8> = (0..25).map(|i| u8::from(i < 9)).collect();
    let echo = evaluate(&Fixed(labels.clone()), &inputs, &labels).unwrap();
    assert_eq!((echo.accuracy, echo.kappa), (1.0, 1.0));
    for class in [0, 1] {
        let constant = evaluate(&Fixed(vec![class; 25]), &inputs, &labels).unwrap();
        assert_eq!(constant.kappa, 0.0);
    }
}

#[test]
fn early_stopping_ends_on_a_plateau() {
    let (x, y) = separable();
    let mut m = toy_model(11);
    let cfg =
        TrainConfig { epochs: 500, early_stop_patience: Some(3), early_stop_min_delta: 10.0, ..TrainConfig::default() };
    let log = train(&mut m, &x, &y, &cfg).unwrap();
    assert!(log.stopped_early);
    assert_eq!(log.epochs.len(), 4);
}

fn quick_spec() -> SyntheticSpec {
    let mut spec = SyntheticSpec {
        channels: PRESET_RANKED_16.iter().map(|c| c.to_string()).collect(),
        ..SyntheticSpec::default()
    };
    spec.signatures.retain(|s| spec.channels.contains(&s.channel));
    (spec.min_duration_s, spec.max_duration_s) = (10.0, 12.0);
    spec
}

#[test]
fn matrix_has_nine_cells_on_one_split() {
    let (_, data) = common::prepared_synthetic(&quick_spec(), None, 21);
    let cfg = TrainConfig { epochs: 4, ..TrainConfig::default() };
    let template = ModelConfig::default();
    let presets = matrix_subsets(ChannelSpec::Paper8, None, &data.channels).unwrap();
    let result = run_matrix(&data, &presets, &template, &cfg, 5, 1).unwrap();
    assert_eq!(result.cells.len(), 9);
    let names: Vec<String> = result.cells.iter().map(|c| format!("{}:{}", c.modality.code(), c.model)).collect();
    assert_eq!(
        names,
        [
            "eeg:BiSAM-16",
            "eeg:BiSAM-16",
            "eeg:BiSAM-8",
            "eeg:BiSAM-4",
            "dv:BiSAM-DV",
            "multimodal:BiSAM-16",
            "multimodal:BiSAM-16",
            "multimodal:BiSAM-8",
            "multimodal:BiSAM-4"
        ]
    );
    assert_eq!(result.test_ids, data.split.test_ids);
    for c in &result.cells {
        let m = &c.metrics;
        assert_eq!((m.tp + m.fn_ + m.fp + m.tn) as usize, data.test.len());
    }
    let table = result.render_table();
    assert_eq!(table.lines().count(), 11);

    // A different channel choice leaves the descriptive-only row untouched,
    // and running cells in parallel changes nothing.
    let (_, report) = bisam::pipeline::reference_importance(&data, &template, &cfg, 5, 5).unwrap();
    let computed = matrix_subsets(ChannelSpec::Computed(8), Some(&report), &data.channels).unwrap();
    let other = run_matrix(&data, &computed, &template, &cfg, 5, 0).unwrap();
    let dv = |r: &bisam::trainer::MatrixResult| r.cell(Modality::DescriptiveOnly, "BiSAM-DV").unwrap().clone();
    assert_eq!(dv(&result), dv(&other));
    assert_eq!(run_matrix(&data, &presets, &template, &cfg, 5, 3).unwrap(), result);
}

#[test]
fn early_losses_fall_on_the_default_cohort() {
    let spec = SyntheticSpec::default();
    let channels = common::preset8();
    let mut falling = 0;
    for seed in 0..5 {
        let (_, data) = common::prepared_synthetic(&spec, Some(&channels), seed);
        let mut cfg = common::config(Modality::MultiModal, 0, rng::derive_seed(seed, "model"));
        cfg.channel_subset = channels.clone();
        let (x, y) = data.inputs(&data.train, &cfg).unwrap();
        let mut model = Bisam::new(cfg).unwrap();
        let log = train(&mut model, &x, &y, &TrainConfig { epochs: 5, seed, ..TrainConfig::default() }).unwrap();
        let losses: Vec<f64> = log.epochs.iter().map(|e| e.loss).collect();
        if losses.windows(2).all(|w| w[1] <= w[0]) {
            falling += 1;
        }
    }
    assert!(falling >= 4, "only {falling} of 5 seeds had non-increasing loss");
}
