use super::{dpss::TaperSet, BandDef, SpectralError};
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::sync::Arc;

/// One-sided power spectral density on the FFT grid `0..=fs/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    /// Density in signal units squared per Hz.
    pub psd: Vec<f64>,
    pub fs: f64,
    pub n_windows: usize,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        self.freqs.get(1).map_or(self.fs, |f| f - self.freqs[0])
    }

    /// Index of the largest bin.
    pub fn peak_bin(&self) -> usize {
        self.psd
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }

    /// Element-wise mean of several estimates on the same grid.
    pub fn average(estimates: &[PsdEstimate]) -> Option<PsdEstimate> {
        let first = estimates.first()?;
        let mut psd = vec![0.0; first.psd.len()];
        let mut n_windows = 0;
        for e in estimates {
            psd.iter_mut().zip(&e.psd).for_each(|(a, b)| *a += b);
            n_windows += e.n_windows;
        }
        let k = estimates.len() as f64;
        psd.iter_mut().for_each(|a| *a /= k);
        Some(PsdEstimate { freqs: first.freqs.clone(), psd, fs: first.fs, n_windows })
    }
}

/// Reusable multitaper estimator for a fixed window length.
pub struct MultitaperEstimator {
    tapers: TaperSet,
    fs: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MultitaperEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultitaperEstimator").field("n", &self.tapers.n).field("k", &self.tapers.k).finish()
    }
}

impl MultitaperEstimator {
    pub fn new(tapers: TaperSet, fs: f64) -> Result<Self, SpectralError> {
        if !(fs > 0.0) {
            return Err(SpectralError::Invalid(format!("sampling rate {fs} must be positive")));
        }
        let fft = FftPlanner::new().plan_fft_forward(tapers.n);
        Ok(Self { tapers, fs, fft })
    }

    pub fn tapers(&self) -> &TaperSet {
        &self.tapers
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn n_bins(&self) -> usize {
        self.tapers.n / 2 + 1
    }

    pub fn freqs(&self) -> Vec<f64> {
        let df = self.fs / self.tapers.n as f64;
        (0..self.n_bins()).map(|i| i as f64 * df).collect()
    }

    /// Adds the one-sided multitaper density of `window` into `acc`.
    pub fn accumulate(&self, window: &[f64], acc: &mut [f64]) -> Result<(), SpectralError> {
        let n = self.tapers.n;
        if window.len() != n {
            return Err(SpectralError::LengthMismatch { window: window.len(), taper: n });
        }
        if window.iter().any(|v| !v.is_finite()) {
            return Err(SpectralError::NonFinite);
        }
        let bins = self.n_bins();
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        // tapers have unit energy, so density scaling is 1/fs per taper
        let scale = 1.0 / (self.fs * self.tapers.k as f64);
        let nyquist = if n.is_multiple_of(2) { Some(n / 2) } else { None };
        for taper in &self.tapers.tapers {
            for ((b, x), v) in buf.iter_mut().zip(window).zip(taper) {
                *b = Complex::new(x * v, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (i, a) in acc[..bins].iter_mut().enumerate() {
                let one_sided = if i == 0 || Some(i) == nyquist { 1.0 } else { 2.0 };
                *a += one_sided * scale * buf[i].norm_sqr();
            }
        }
        Ok(())
    }

    pub fn estimate(&self, window: &[f64]) -> Result<PsdEstimate, SpectralError> {
        let mut psd = vec![0.0; self.n_bins()];
        self.accumulate(window, &mut psd)?;
        Ok(PsdEstimate { freqs: self.freqs(), psd, fs: self.fs, n_windows: 1 })
    }
}

/// Multitaper PSD of a single window: taper, transform, and average the
/// squared magnitudes across tapers.
pub fn multitaper_psd(window: &[f64], tapers: &TaperSet, fs: f64) -> Result<PsdEstimate, SpectralError> {
    MultitaperEstimator::new(tapers.clone(), fs)?.estimate(window)
}

/// Integral over `[f_lo, f_hi)` of the piecewise-linear interpolant of the PSD.
pub fn band_power(psd: &PsdEstimate, band: &BandDef) -> Result<f64, SpectralError> {
    integrate(psd, band.f_lo, band.f_hi)
}

/// Trapezoidal integral of the PSD over `[lo, hi]`, exact for the linear
/// interpolant, so integrals over adjacent intervals add up.
pub fn integrate(psd: &PsdEstimate, lo: f64, hi: f64) -> Result<f64, SpectralError> {
    let nyquist = psd.fs / 2.0;
    if lo < 0.0 || hi > nyquist || lo >= hi {
        return Err(SpectralError::BandOutOfRange { lo, hi, nyquist });
    }
    let f = &psd.freqs;
    let s = &psd.psd;
    let last = *f.last().unwrap_or(&0.0);
    if hi > last {
        return Err(SpectralError::BandOutOfRange { lo, hi, nyquist: last });
    }
    let interp = |j: usize, x: f64| {
        let t = (x - f[j]) / (f[j + 1] - f[j]);
        s[j] + t * (s[j + 1] - s[j])
    };
    let mut total = 0.0;
    for j in 0..f.len() - 1 {
        let (a, b) = (f[j].max(lo), f[j + 1].min(hi));
        if b > a {
            total += (b - a) * (interp(j, a) + interp(j, b)) / 2.0;
        }
    }
    Ok(total.max(0.0))
}
