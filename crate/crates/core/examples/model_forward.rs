//! Builds an untrained multimodal classifier, runs one subject through it
//! and prints the attention each pathway pays across its tokens.
//!
//! Run with `cargo run --release --example model_forward`.

use bisam::model::{bisam_forward, Bisam, Modality, ModelConfig, SubjectTokens, TokenKind, TokenSequence, PATHWAYS};
use bisam::tensor::{Mode, Tape, Tensor};
use rand::Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channels: Vec<String> = bisam::corpus::PRESET_RANKED_16[..8].iter().map(|s| s.to_string()).collect();
    let cfg = ModelConfig {
        modality: Modality::MultiModal,
        channel_subset: channels.clone(),
        seed: 11,
        ..ModelConfig::default()
    };
    let model = Bisam::new(cfg)?;
    println!("{} with {} parameters", model.config.name(), model.params.numel());

    // Eight signal tokens of four band powers, three descriptive tokens of (value, present).
    let mut r = bisam::rng::stream(11, "example/tokens");
    let signal: Vec<f64> = (0..8 * 4).map(|_| r.random_range(-1.5..1.5)).collect();
    let subject = SubjectTokens {
        signal: Some(TokenSequence::new(Tensor::new(vec![8, 4], signal)?, TokenKind::Signal)?),
        descriptive: Some(TokenSequence::new(
            Tensor::new(vec![3, 2], vec![0.4, 1.0, -0.2, 1.0, 0.0, 0.0])?,
            TokenKind::Descriptive,
        )?),
    };

    let logits = model.logits(std::slice::from_ref(&subject))?;
    println!("logits {:.4?}", logits[0]);

    let mut tape = Tape::new();
    let bound = tape.bind(&model.params);
    let mut unused = bisam::rng::stream(0, "example/dropout");
    let out = bisam_forward(&mut tape, &bound, &model.config, &[&subject], Mode::Eval, &mut unused)?;
    let tokens = [channels.join(" "), "age schooling disease-duration".to_string()];
    for ((name, att), order) in PATHWAYS.iter().zip(&out.attention).zip(&tokens) {
        let w = tape.value(att.weights[0]);
        let received: Vec<f64> =
            (0..w.cols()).map(|c| (0..w.rows()).map(|q| w.at(q, c)).sum::<f64>() / w.rows() as f64).collect();
        println!("{name} pathway, head 0, tokens {order}:\n  mean attention received {received:.3?}");
    }
    Ok(())
}
