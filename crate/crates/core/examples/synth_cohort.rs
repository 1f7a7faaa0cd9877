//! Writes a small synthetic cohort to disk and reads it back through the
//! manifest, the way the `synth` subcommand does.
//!
//! Run with `cargo run --release --example synth_cohort [out_dir]`.

use bisam::corpus::{
    annotate_labels, generate_synthetic_cohort, load_manifest, load_recording, SyntheticSpec, PRESET_RANKED_16,
};
use bisam::spectral::Band;
use std::collections::BTreeMap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("bisam-synth"));
    let channels: Vec<String> = PRESET_RANKED_16.iter().map(|s| s.to_string()).collect();
    let mut spec =
        SyntheticSpec::study_shaped().with_signatures(&channels[..4], &[(Band::Theta, 1.5), (Band::Beta, 1.5)]);
    spec.channels = channels;
    spec.min_duration_s = 10.0;
    spec.max_duration_s = 15.0;

    generate_synthetic_cohort(&spec, 42, &out)?;
    let manifest = load_manifest(out.join("manifest.json"))?;
    println!("wrote {} subjects to {}", manifest.participants.len(), out.display());

    let mut per_group: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &manifest.participants {
        *per_group.entry(p.group.code()).or_default() += 1;
    }
    println!("group sizes: {per_group:?}");
    let labelled = annotate_labels(&manifest.participants);
    let positives = labelled.records.iter().filter(|r| r.label == 1).count();
    println!("binary labels: {} negative, {positives} positive", labelled.len() - positives);

    let first = &manifest.participants[0];
    let rec = load_recording(&manifest, &first.id)?;
    println!(
        "{} ({}) has {} channels, {:.1} s at {} Hz; disease duration {}",
        first.id,
        first.group.code(),
        rec.n_channels(),
        rec.duration_s(),
        rec.fs,
        first.disease_duration.map_or("n/a".to_string(), |d| format!("{d:.1} years"))
    );
    Ok(())
}
