mod common;

use bisam::corpus::{Recording, SignalMatrix};
use bisam::spectral::{
    band_power, compute_dpss, extract_features, integrate, multitaper_psd, normalize_features, BandDef, BandPowerTable,
    MultitaperEstimator, SpectralParams, LOG_EPS,
};
use common::white;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use std::f64::consts::PI;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn tapers_are_orthonormal_across_lengths() {
    for n in [64, 100, 128, 257, 500, 1000, 1024, 2048] {
        let t = compute_dpss(n, 4.0, 7).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                let d = dot(&t.tapers[i], &t.tapers[j]);
                assert!((d - expect).abs() <= 1e-8, "n={n} <{i},{j}> = {d}");
            }
        }
    }
}

/// Dense eigendecomposition of the tridiagonal commuting matrix, built here
/// from its textbook definition.
fn dense_oracle(n: usize, nw: f64, k: usize) -> Vec<Vec<f64>> {
    let w = nw / n as f64;
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            ((n as f64 - 1.0 - 2.0 * i as f64) / 2.0).powi(2) * (2.0 * PI * w).cos()
        } else if i + 1 == j {
            (j * (n - j)) as f64 / 2.0
        } else if j + 1 == i {
            (i * (n - i)) as f64 / 2.0
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order[..k].iter().map(|&c| eig.eigenvectors.column(c).iter().copied().collect()).collect()
}

#[test]
fn tapers_match_dense_eigenvectors() {
    for n in [64, 128, 300, 512] {
        let t = compute_dpss(n, 4.0, 7).unwrap();
        for (i, want) in dense_oracle(n, 4.0, 7).iter().enumerate() {
            let sign = dot(&t.tapers[i], want).signum();
            let err = t.tapers[i].iter().zip(want).map(|(a, b)| (a - sign * b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8, "n={n} taper {i}: {err:e}");
        }
    }
}

#[test]
fn concentrations_are_high_and_decreasing() {
    let t = compute_dpss(1000, 4.0, 7).unwrap();
    assert!(t.eigenvalues[0] > 0.999_999);
    assert!(t.eigenvalues[6] > 0.9);
    assert!(t.eigenvalues.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn parseval_on_white_noise() {
    let fs = 500.0;
    let n = 1000;
    let est = MultitaperEstimator::new(compute_dpss(n, 4.0, 7).unwrap(), fs).unwrap();
    let x = white(3, "parseval", n * 120);
    let mut acc = vec![0.0; est.n_bins()];
    for w in x.chunks_exact(n) {
        est.accumulate(w, &mut acc).unwrap();
    }
    let windows = x.len() / n;
    let psd = bisam::spectral::PsdEstimate {
        freqs: est.freqs(),
        psd: acc.iter().map(|v| v / windows as f64).collect(),
        fs,
        n_windows: windows,
    };
    let total = integrate(&psd, 0.0, fs / 2.0).unwrap();
    let variance = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    assert!(windows >= 100);
    assert!((total / variance - 1.0).abs() < 0.05, "integral {total}, variance {variance}");
}

#[test]
fn alpha_sinusoid_lands_in_alpha() {
    let fs = 500.0;
    let x: Vec<f64> = (0..1000).map(|t| (2.0 * PI * 10.0 * t as f64 / fs).sin()).collect();
    let psd = multitaper_psd(&x, &compute_dpss(1000, 4.0, 7).unwrap(), fs).unwrap();
    let p: Vec<f64> = BandDef::standard().iter().map(|b| band_power(&psd, b).unwrap()).collect();
    let share = p[1] / p.iter().sum::<f64>();
    assert!(share >= 0.9, "alpha share {share}");
    // A unit sinusoid carries power 1/2.
    assert!((integrate(&psd, 0.0, fs / 2.0).unwrap() - 0.5).abs() < 0.01);
}

#[test]
fn multitaper_variance_is_about_one_over_k() {
    let (fs, n, k) = (500.0, 256, 7);
    let multi = MultitaperEstimator::new(compute_dpss(n, 4.0, k).unwrap(), fs).unwrap();
    let single = MultitaperEstimator::new(compute_dpss(n, 4.0, 1).unwrap(), fs).unwrap();
    let trials = 200;
    let bins = multi.n_bins();
    let (mut m1, mut m2, mut s1, mut s2) = (vec![0.0; bins], vec![0.0; bins], vec![0.0; bins], vec![0.0; bins]);
    for t in 0..trials {
        let x = white(t, "variance", n);
        let a = multi.estimate(&x).unwrap().psd;
        let b = single.estimate(&x).unwrap().psd;
        for i in 0..bins {
            m1[i] += a[i];
            m2[i] += a[i] * a[i];
            s1[i] += b[i];
            s2[i] += b[i] * b[i];
        }
    }
    let var = |s: f64, q: f64| q / trials as f64 - (s / trials as f64).powi(2);
    // Interior bins only: DC and Nyquist are real-valued and twice as variable.
    let interior = 10..bins - 10;
    let mv: f64 = interior.clone().map(|i| var(m1[i], m2[i])).sum();
    let sv: f64 = interior.map(|i| var(s1[i], s2[i])).sum();
    let ratio = mv / sv;
    let kf = k as f64;
    assert!(ratio >= 0.5 / kf && ratio <= 2.0 / kf, "variance ratio {ratio}");
}

#[test]
fn single_taper_matches_direct_dft() {
    let (fs, n) = (200.0, 64);
    let tapers = compute_dpss(n, 2.5, 1).unwrap();
    let x = white(9, "dft", n);
    let psd = multitaper_psd(&x, &tapers, fs).unwrap();
    for (bin, &got) in psd.psd.iter().enumerate() {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, (xv, h)) in x.iter().zip(&tapers.tapers[0]).enumerate() {
            let ang = -2.0 * PI * (bin * t) as f64 / n as f64;
            re += xv * h * ang.cos();
            im += xv * h * ang.sin();
        }
        let factor = if bin == 0 || bin == n / 2 { 1.0 } else { 2.0 };
        let want = factor * (re * re + im * im) / fs;
        assert!((got - want).abs() <= 1e-10 * want.max(1e-12), "bin {bin}: {got} vs {want}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn band_powers_are_nonnegative_and_additive(seed in 0u64..10_000, lo in 4.0f64..40.0, width in 1.0f64..30.0, cut in 0.05f64..0.95) {
        let x = white(seed, "bands", 512);
        let psd = multitaper_psd(&x, &compute_dpss(512, 4.0, 7).unwrap(), 250.0).unwrap();
        let hi = lo + width;
        let mid = lo + cut * width;
        let whole = integrate(&psd, lo, hi).unwrap();
        let parts = integrate(&psd, lo, mid).unwrap() + integrate(&psd, mid, hi).unwrap();
        prop_assert!(whole >= 0.0);
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
    }

    #[test]
    fn psd_scales_with_amplitude_squared(seed in 0u64..10_000, a in 0.1f64..10.0) {
        let x = white(seed, "scale", 256);
        let y: Vec<f64> = x.iter().map(|v| a * v).collect();
        let t = compute_dpss(256, 4.0, 7).unwrap();
        let (px, py) = (multitaper_psd(&x, &t, 250.0).unwrap(), multitaper_psd(&y, &t, 250.0).unwrap());
        for (u, v) in px.psd.iter().zip(&py.psd) {
            prop_assert!((v - a * a * u).abs() <= 1e-9 * v.max(1e-12));
        }
    }
}

#[test]
fn recording_features_follow_channel_content() {
    let fs = 500.0;
    let n = 5000;
    let tone = |f: f64| -> Vec<f32> { (0..n).map(|t| (2.0 * PI * f * t as f64 / fs).sin() as f32).collect() };
    let data: Vec<f32> = [6.0, 10.0, 20.0, 50.0].iter().flat_map(|&f| tone(f)).collect();
    let rec = Recording::new(
        vec!["A".into(), "B".into(), "C".into(), "D".into()],
        fs,
        SignalMatrix::new(4, n, data).unwrap(),
    )
    .unwrap();
    let rows = extract_features(&rec, BandDef::standard(), &SpectralParams::default()).unwrap();
    for (c, row) in rows.iter().enumerate() {
        let best = (0..4).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(best, c, "channel {c}: {row:?}");
    }
}

#[test]
fn too_short_recording_is_an_error() {
    let short = SignalMatrix::new(1, 999, vec![0.0; 999]).unwrap();
    assert!(Recording::new(vec!["A".into()], 500.0, short).is_err());
    let rec = Recording::new(vec!["A".into()], 500.0, SignalMatrix::new(1, 1000, vec![0.0; 1000]).unwrap()).unwrap();
    let long_windows = SpectralParams { window_s: 4.0, ..SpectralParams::default() };
    assert!(extract_features(&rec, BandDef::standard(), &long_windows).is_err());
}

#[test]
fn normalisation_uses_training_rows_only() {
    let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
    let powers: Vec<[f64; 4]> = (0..4).map(|i| [10f64.powi(i + 1); 4]).collect();
    let table = BandPowerTable::new(ids.clone(), vec!["A".into()], powers).unwrap();
    let norm = normalize_features(&table, &ids[..2]).unwrap();
    // Train log-powers are 1 and 2 (plus a negligible offset): mean 1.5, std 0.5.
    let expect = |p: f64| ((p + LOG_EPS).log10() - 1.5) / 0.5;
    for (i, p) in [10.0, 100.0, 1000.0, 10000.0].iter().enumerate() {
        assert!((norm.row(i)[0][2] - expect(*p)).abs() < 1e-9);
    }
    // Changing a test row leaves the statistics untouched.
    let mut powers2: Vec<[f64; 4]> = (0..4).map(|i| [10f64.powi(i + 1); 4]).collect();
    powers2[3] = [1e9; 4];
    let norm2 =
        normalize_features(&BandPowerTable::new(ids.clone(), vec!["A".into()], powers2).unwrap(), &ids[..2]).unwrap();
    assert_eq!(norm.mean, norm2.mean);
    assert_eq!(norm.std, norm2.std);
}

#[test]
fn feature_csv_round_trip() {
    let ids = vec!["a".to_string(), "b".to_string()];
    let powers = vec![[1.0, 2.5, 1e-7, 3.25], [0.1, 0.2, 0.3, 1.0 / 3.0], [4.0; 4], [5.0; 4]];
    let table = BandPowerTable::new(ids, vec!["X".into(), "Y".into()], powers).unwrap();
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let back = BandPowerTable::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, table);
}
