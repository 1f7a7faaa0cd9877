//! Fits a two-class linear classifier with the reverse-mode tape and Adam,
//! then checks one analytic gradient against a central difference.
//!
//! Run with `cargo run --release --example autodiff_adam`.

use bisam::tensor::{adam_step, Adam, AdamState, Params, Tape, Tensor};
use rand::Rng;

/// Weighted cross-entropy of `x @ w + b` against `labels`, with gradients.
fn loss_and_grads(params: &Params, x: &Tensor, labels: &[usize]) -> (f64, bisam::tensor::Grads) {
    let mut tape = Tape::new();
    let bound = tape.bind(params);
    let xv = tape.constant(x.clone());
    let z = tape.matmul(xv, bound["w"]).unwrap();
    let logits = tape.add_row(z, bound["b"]).unwrap();
    let loss = tape.cross_entropy(logits, labels, None).unwrap();
    let value = tape.value(loss).data()[0];
    tape.backward(loss).unwrap();
    (value, tape.collect_grads(&bound))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut r = bisam::rng::stream(5, "example/data");
    let n = 200;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let (a, b): (f64, f64) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        rows.push(vec![a, b, 1.0]);
        labels.push(usize::from(a + 0.5 * b > 0.3));
    }
    let x = Tensor::from_rows(&rows)?;

    let mut params = Params::new();
    params.insert("w", Tensor::zeros(&[3, 2]));
    params.insert("b", Tensor::zeros(&[1, 2]));

    let (_, grads) = loss_and_grads(&params, &x, &labels);
    let h = 1e-6;
    params.get_mut("w").unwrap().data_mut()[0] += h;
    let up = loss_and_grads(&params, &x, &labels).0;
    params.get_mut("w").unwrap().data_mut()[0] -= 2.0 * h;
    let down = loss_and_grads(&params, &x, &labels).0;
    params.get_mut("w").unwrap().data_mut()[0] += h;
    println!(
        "d loss / d w[0,0]: analytic {:.8}, central difference {:.8}",
        grads["w"].data()[0],
        (up - down) / (2.0 * h)
    );

    let hp = Adam { lr: 0.05, ..Adam::default() };
    let mut state = AdamState::new();
    for step in 0..=300 {
        let (loss, grads) = loss_and_grads(&params, &x, &labels);
        if step % 50 == 0 {
            println!("step {step:>3}: loss {loss:.4}");
        }
        adam_step(&mut params, &grads, &mut state, &hp)?;
    }

    let w = params.get("w").unwrap();
    let b = params.get("b").unwrap();
    let correct = rows
        .iter()
        .zip(&labels)
        .filter(|(row, &l)| {
            let score = |k: usize| (0..3).map(|i| row[i] * w.at(i, k)).sum::<f64>() + b.data()[k];
            usize::from(score(1) > score(0)) == l
        })
        .count();
    println!("training accuracy {:.3}", correct as f64 / n as f64);
    Ok(())
}
