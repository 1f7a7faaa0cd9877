//! Runs the nine-cell comparison (signal only, descriptive only and both,
//! over several channel subsets) on a reduced cohort and prints the table.
//!
//! Run with `cargo run --release --example result_matrix`.

use bisam::corpus::{standard_63, SyntheticCohort, SyntheticSpec, PRESET_RANKED_16};
use bisam::model::{Modality, ModelConfig};
use bisam::pipeline::{matrix_subsets, prepare_cohort, synthetic_features};
use bisam::selection::ChannelSpec;
use bisam::spectral::{Band, SpectralParams};
use bisam::trainer::{run_matrix, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The ranked 16 plus eight other montage channels, so the full-montage row differs from the 16-channel row.
    let ranked: Vec<String> = PRESET_RANKED_16.iter().map(|s| s.to_string()).collect();
    let extra = standard_63().into_iter().filter(|c| !ranked.contains(c)).take(8);
    let channels: Vec<String> = ranked.iter().cloned().chain(extra).collect();
    let mut spec =
        SyntheticSpec::study_shaped().with_signatures(&ranked[..8], &[(Band::Theta, 1.5), (Band::Beta, 1.5)]);
    spec.channels = channels;
    spec.min_duration_s = 20.0;
    spec.max_duration_s = 30.0;
    let cohort = SyntheticCohort::generate(&spec, 0)?;
    let table = synthetic_features(&cohort, None, &SpectralParams::default())?;
    let data = prepare_cohort(&table, &cohort.participants, 0.8, 0)?;

    let subsets = matrix_subsets(ChannelSpec::Paper8, None, &data.channels)?;
    let train_cfg = TrainConfig { epochs: 60, ..TrainConfig::default() };
    let result = run_matrix(&data, &subsets, &ModelConfig::default(), &train_cfg, 0, 0)?;
    println!("{}", result.render_table());

    let dv = result.cell(Modality::DescriptiveOnly, "BiSAM-DV").map(|c| c.metrics.accuracy);
    println!("descriptive-only accuracy: {dv:?}");
    Ok(())
}
