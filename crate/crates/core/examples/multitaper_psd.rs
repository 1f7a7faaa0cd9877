//! Estimates the spectrum of a noisy two-tone signal with Slepian tapers and
//! integrates it over the four standard bands.
//!
//! Run with `cargo run --release --example multitaper_psd`.

use bisam::spectral::{band_power, compute_dpss, integrate, multitaper_psd, BandDef};
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (fs, n) = (500.0, 1000);
    let tapers = compute_dpss(n, 4.0, 7)?;
    println!("concentration of the 7 tapers: {:.6?}", tapers.eigenvalues);

    let mut r = bisam::rng::stream(1, "example/noise");
    let noise = Normal::new(0.0, 0.3)?;
    let x: Vec<f64> = (0..n)
        .map(|t| {
            let s = t as f64 / fs;
            (2.0 * PI * 6.0 * s).sin() + 0.5 * (2.0 * PI * 20.0 * s).sin() + noise.sample(&mut r)
        })
        .collect();

    let psd = multitaper_psd(&x, &tapers, fs)?;
    let peak = (0..psd.psd.len()).max_by(|&a, &b| psd.psd[a].total_cmp(&psd.psd[b])).unwrap();
    // Each tone is spread over a plateau of +-2 Hz, the taper bandwidth.
    println!("strongest bin at {:.1} Hz", psd.freqs[peak]);

    let total = integrate(&psd, 0.0, fs / 2.0)?;
    let variance = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    println!("integrated power {total:.4} against sample variance {variance:.4}");

    for band in BandDef::standard() {
        let p = band_power(&psd, &band)?;
        println!(
            "{:>6} {:>5.1}-{:<5.1} Hz: {:.4} ({:.1}% of total)",
            band.band.name(),
            band.f_lo,
            band.f_hi,
            p,
            100.0 * p / total
        );
    }
    Ok(())
}
