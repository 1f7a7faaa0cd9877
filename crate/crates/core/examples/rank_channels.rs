//! Ranks channels by permutation importance on a cohort where only two
//! channels carry the group difference, then builds subsets from the ranking.
//!
//! Run with `cargo run --release --example rank_channels`.

use bisam::corpus::{SyntheticCohort, SyntheticSpec, PRESET_RANKED_16};
use bisam::model::ModelConfig;
use bisam::pipeline::{prepare_cohort, reference_importance, synthetic_features};
use bisam::selection::{select_subset, SubsetSource};
use bisam::spectral::{Band, SpectralParams};
use bisam::trainer::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channels: Vec<String> = PRESET_RANKED_16[..8].iter().map(|s| s.to_string()).collect();
    let informative = [channels[2].clone(), channels[5].clone()];
    let mut spec =
        SyntheticSpec::study_shaped().with_signatures(&informative, &[(Band::Theta, 3.0), (Band::Beta, 3.0)]);
    spec.channels = channels.clone();
    spec.min_duration_s = 20.0;
    spec.max_duration_s = 30.0;
    spec.subject_jitter = 0.0;
    let cohort = SyntheticCohort::generate(&spec, 1)?;
    let table = synthetic_features(&cohort, None, &SpectralParams::default())?;
    let data = prepare_cohort(&table, &cohort.participants, 0.8, 1)?;

    let (_, report) = reference_importance(&data, &ModelConfig::default(), &TrainConfig::default(), 10, 1)?;
    println!("informative channels: {}", informative.join(", "));
    println!("holdout accuracy with intact inputs: {:.3}", report.baseline_accuracy);
    for (name, score, rank) in report.ranked() {
        println!("  #{rank:<2} {name:<4} {score:.3}");
    }

    let top2 = select_subset(SubsetSource::Computed, 2, Some(&report), &channels)?;
    println!("computed top-2 subset: {:?}", top2.channels);
    Ok(())
}
