//! Scores a set of predictions with accuracy, precision, recall, F1 and
//! Cohen's kappa, under both averaging conventions.
//!
//! Run with `cargo run --example classification_metrics`.

use bisam::stats::{cohen_kappa, confusion, metrics, Averaging};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels = [0u8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
    let preds = [0u8, 0, 0, 0, 0, 0, 0, 1, 1, 0, 1, 1, 1, 0, 1];
    let cm = confusion(&labels, &preds)?;
    println!("tp {} fn {} fp {} tn {}", cm.tp, cm.fn_, cm.fp, cm.tn);

    for averaging in [Averaging::BinaryPositive, Averaging::Macro] {
        let report = metrics(&cm, averaging);
        let (p, r, f) = report.headline();
        println!(
            "{averaging:?}: accuracy {:.3} precision {p:.3} recall {r:.3} f1 {f:.3} kappa {:.3}",
            report.accuracy, report.kappa
        );
    }

    let k = cohen_kappa(&cm);
    println!("observed agreement {:.3}, chance agreement {:.3}, kappa {:.3}", k.p_o, k.p_e, k.kappa);

    // Always predicting the majority class earns a decent accuracy and no kappa.
    let majority = confusion(&labels, &[0; 15])?;
    let report = metrics(&majority, Averaging::BinaryPositive);
    println!("majority predictor: accuracy {:.3}, kappa {:.3}", report.accuracy, report.kappa);
    Ok(())
}
