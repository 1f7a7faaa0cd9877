//! Trains one multimodal classifier on a synthetic cohort, reports its test
//! metrics and reloads it from a checkpoint.
//!
//! Run with `cargo run --release --example train_single_cell`.

use bisam::corpus::{SyntheticCohort, SyntheticSpec, PRESET_RANKED_16};
use bisam::model::{load_checkpoint, save_checkpoint, Modality, ModelConfig};
use bisam::pipeline::{prepare_cohort, synthetic_features};
use bisam::selection::{ChannelSubset, SubsetSource};
use bisam::spectral::{Band, SpectralParams};
use bisam::trainer::{run_cell, CellSpec, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channels: Vec<String> = PRESET_RANKED_16[..8].iter().map(|s| s.to_string()).collect();
    let mut spec = SyntheticSpec::study_shaped().with_signatures(&channels, &[(Band::Theta, 1.5), (Band::Beta, 1.5)]);
    spec.channels = channels.clone();
    spec.min_duration_s = 20.0;
    spec.max_duration_s = 30.0;
    let cohort = SyntheticCohort::generate(&spec, 0)?;
    let table = synthetic_features(&cohort, None, &SpectralParams::default())?;
    let data = prepare_cohort(&table, &cohort.participants, 0.8, 0)?;
    println!("{} training and {} test subjects", data.train.len(), data.test.len());

    let cell = CellSpec {
        modality: Modality::MultiModal,
        subset: Some(ChannelSubset { channels, source: SubsetSource::PaperPreset8 }),
    };
    let train_cfg = TrainConfig { epochs: 100, ..TrainConfig::default() };
    let (model, log, result) = run_cell(&data, &cell, &ModelConfig::default(), &train_cfg, 0)?;
    for e in log.epochs.iter().step_by(20) {
        println!("epoch {:>3}: loss {:.4}", e.epoch, e.loss);
    }
    let m = &result.metrics;
    let (p, r, f) = m.headline();
    println!(
        "{}: accuracy {:.3} precision {p:.3} recall {r:.3} f1 {f:.3} kappa {:.3}",
        result.model, m.accuracy, m.kappa
    );

    let path = std::env::temp_dir().join("bisam-example-checkpoint.json");
    save_checkpoint(&model, &path)?;
    let reloaded = load_checkpoint(&path, Some(&model.config))?;
    let (x_test, _) = data.inputs(&data.test, &model.config)?;
    let same = model.logits(&x_test)? == reloaded.logits(&x_test)?;
    println!("checkpoint at {} reproduces the test logits exactly: {same}", path.display());
    Ok(())
}
