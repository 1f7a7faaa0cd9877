//! Rank correlation with tied values, compared against Pearson correlation
//! on a monotone but nonlinear relationship.
//!
//! Run with `cargo run --example spearman_correlation`.

use bisam::stats::{average_ranks, pearson, spearman_rho};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0, 8.0];
    println!("values       {x:?}");
    println!("tied ranks   {:?}", average_ranks(&x).ranks);

    let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
    println!("y = exp(x): spearman {:.4}, pearson {:.4}", spearman_rho(&x, &y)?, pearson(&x, &y)?);

    let noisy = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
    println!("shuffled pairs: spearman {:.4}", spearman_rho(&x, &noisy)?);

    match spearman_rho(&x, &[1.0; 8]) {
        Ok(rho) => println!("constant input: {rho}"),
        Err(e) => println!("constant input is rejected: {e}"),
    }
    Ok(())
}
