//! Turns every recording of a synthetic cohort into per-channel band powers,
//! then standardises them with statistics taken from the training split only.
//!
//! Run with `cargo run --release --example band_power_features`.

use bisam::corpus::{annotate_labels, split_train_test, SyntheticCohort, SyntheticSpec, PRESET_RANKED_16};
use bisam::pipeline::synthetic_features;
use bisam::spectral::{normalize_features, Band, SpectralParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channels: Vec<String> = PRESET_RANKED_16[..8].iter().map(|s| s.to_string()).collect();
    let mut spec = SyntheticSpec::study_shaped().with_signatures(&channels[..2], &[(Band::Theta, 2.0)]);
    spec.channels = channels;
    spec.min_duration_s = 10.0;
    spec.max_duration_s = 15.0;
    let cohort = SyntheticCohort::generate(&spec, 3)?;

    let table = synthetic_features(&cohort, None, &SpectralParams::default())?;
    println!("{} subjects x {} channels x 4 bands", table.subject_ids().len(), table.channels().len());

    let split = split_train_test(&annotate_labels(&cohort.participants), 0.8, 3)?;
    let norm = normalize_features(&table, &split.train_ids)?;

    // Mean standardised theta power per group on the two boosted channels and one plain channel.
    for (c, name) in [(0, "boosted"), (1, "boosted"), (5, "plain")] {
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for (i, p) in cohort.participants.iter().enumerate() {
            let label = usize::from(p.label());
            sums[label] += norm.row(i)[c][Band::Theta as usize];
            counts[label] += 1;
        }
        println!(
            "{:>4} ({name}): theta z-score {:+.2} without freezing, {:+.2} with freezing",
            table.channels()[c],
            sums[0] / counts[0] as f64,
            sums[1] / counts[1] as f64
        );
    }

    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let text = String::from_utf8(csv)?;
    println!("\nfirst lines of the feature CSV:");
    for line in text.lines().take(3) {
        println!("  {}", &line[..line.len().min(110)]);
    }
    Ok(())
}
