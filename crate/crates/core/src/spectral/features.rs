use super::{band_power, compute_dpss, Band, BandDef, MultitaperEstimator, PsdEstimate, SpectralError};
use crate::corpus::Recording;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

/// Offset added before taking log10 of band powers.
pub const LOG_EPS: f64 = 1e-12;

/// Windowing and taper settings for feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralParams {
    pub nw: f64,
    pub k: usize,
    /// Window length in seconds.
    pub window_s: f64,
    /// Fractional overlap between consecutive windows, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self { nw: 4.0, k: 7, window_s: 2.0, overlap: 0.5 }
    }
}

/// Per-channel band powers for one sampling rate, reusing tapers and the FFT plan.
#[derive(Debug)]
pub struct FeatureExtractor {
    estimator: MultitaperEstimator,
    bands: [BandDef; 4],
    window_len: usize,
    step: usize,
}

impl FeatureExtractor {
    pub fn new(fs: f64, bands: [BandDef; 4], params: &SpectralParams) -> Result<Self, SpectralError> {
        if !(0.0..1.0).contains(&params.overlap) {
            return Err(SpectralError::Invalid(format!("overlap {} outside [0, 1)", params.overlap)));
        }
        let window_len = (params.window_s * fs).round() as usize;
        let step = ((window_len as f64 * (1.0 - params.overlap)).round() as usize).max(1);
        let tapers = compute_dpss(window_len, params.nw, params.k)?;
        let estimator = MultitaperEstimator::new(tapers, fs)?;
        for b in &bands {
            if b.f_hi > fs / 2.0 {
                return Err(SpectralError::BandOutOfRange { lo: b.f_lo, hi: b.f_hi, nyquist: fs / 2.0 });
            }
        }
        Ok(Self { estimator, bands, window_len, step })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn n_windows(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            0
        } else {
            1 + (n_samples - self.window_len) / self.step
        }
    }

    /// Window-averaged multitaper PSD of one channel, each window mean-detrended.
    pub fn channel_psd(&self, x: &[f32]) -> Result<PsdEstimate, SpectralError> {
        let n_windows = self.n_windows(x.len());
        if n_windows == 0 {
            return Err(SpectralError::TooShort { samples: x.len(), window: self.window_len });
        }
        let mut acc = vec![0.0; self.estimator.n_bins()];
        let mut window = vec![0.0; self.window_len];
        for w in 0..n_windows {
            let seg = &x[w * self.step..w * self.step + self.window_len];
            let mean = seg.iter().map(|&v| f64::from(v)).sum::<f64>() / self.window_len as f64;
            for (o, &v) in window.iter_mut().zip(seg) {
                *o = f64::from(v) - mean;
            }
            self.estimator.accumulate(&window, &mut acc)?;
        }
        acc.iter_mut().for_each(|a| *a /= n_windows as f64);
        Ok(PsdEstimate { freqs: self.estimator.freqs(), psd: acc, fs: self.estimator.fs(), n_windows })
    }

    pub fn band_powers(&self, x: &[f32]) -> Result<[f64; 4], SpectralError> {
        let psd = self.channel_psd(x)?;
        let mut out = [0.0; 4];
        for (o, b) in out.iter_mut().zip(&self.bands) {
            *o = band_power(&psd, b)?;
        }
        Ok(out)
    }

    /// One 4-vector of band powers per channel, in recording order.
    pub fn extract(&self, recording: &Recording) -> Result<Vec<[f64; 4]>, SpectralError> {
        (0..recording.n_channels()).map(|c| self.band_powers(recording.channel(c))).collect()
    }
}

/// Band powers of every channel of `recording`.
pub fn extract_features(
    recording: &Recording,
    bands: [BandDef; 4],
    params: &SpectralParams,
) -> Result<Vec<[f64; 4]>, SpectralError> {
    FeatureExtractor::new(recording.fs, bands, params)?.extract(recording)
}

/// Raw band powers, `[subjects x channels x 4]`, channels in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowerTable {
    subject_ids: Vec<String>,
    channels: Vec<String>,
    powers: Vec<[f64; 4]>,
}

impl BandPowerTable {
    pub fn new(subject_ids: Vec<String>, channels: Vec<String>, powers: Vec<[f64; 4]>) -> Result<Self, SpectralError> {
        if powers.len() != subject_ids.len() * channels.len() {
            return Err(SpectralError::Table(format!(
                "{} cells for {} subjects x {} channels",
                powers.len(),
                subject_ids.len(),
                channels.len()
            )));
        }
        if powers.iter().flatten().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(SpectralError::Table("band powers must be finite and nonnegative".into()));
        }
        Ok(Self { subject_ids, channels, powers })
    }

    /// Assembles a table from per-subject rows.
    pub fn from_rows(channels: Vec<String>, rows: Vec<(String, Vec<[f64; 4]>)>) -> Result<Self, SpectralError> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut powers = Vec::with_capacity(rows.len() * channels.len());
        for (id, row) in rows {
            if row.len() != channels.len() {
                return Err(SpectralError::Table(format!(
                    "subject {id}: {} channels, expected {}",
                    row.len(),
                    channels.len()
                )));
            }
            ids.push(id);
            powers.extend(row);
        }
        Self::new(ids, channels, powers)
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn row(&self, subject: usize) -> &[[f64; 4]] {
        let c = self.channels.len();
        &self.powers[subject * c..(subject + 1) * c]
    }

    pub fn get(&self, subject: usize, channel: usize) -> [f64; 4] {
        self.powers[subject * self.channels.len() + channel]
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == id)
    }

    /// Writes `subject_id,channel,theta,alpha,beta,gamma` rows, 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SpectralError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["subject_id", "channel", "theta", "alpha", "beta", "gamma"])?;
        for (s, id) in self.subject_ids.iter().enumerate() {
            for (c, ch) in self.channels.iter().enumerate() {
                let p = self.get(s, c);
                let cells = [id.clone(), ch.clone(), fmt_sig(p[0]), fmt_sig(p[1]), fmt_sig(p[2]), fmt_sig(p[3])];
                wr.write_record(&cells)?;
            }
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads a table written by [`BandPowerTable::write_csv`]. Channel order is
    /// taken from the first subject; every subject must list the same channels.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, SpectralError> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != ["subject_id", "channel", "theta", "alpha", "beta", "gamma"] {
            return Err(SpectralError::Table(format!("unexpected header {header:?}")));
        }
        type SubjectRows = (String, Vec<(String, [f64; 4])>);
        let mut rows: Vec<SubjectRows> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let id = rec[0].to_string();
            let mut p = [0.0; 4];
            for (i, v) in p.iter_mut().enumerate() {
                *v = rec[2 + i].parse().map_err(|e| SpectralError::Table(format!("{}: {e}", &rec[2 + i])))?;
            }
            match rows.last_mut() {
                Some((last, cells)) if *last == id => cells.push((rec[1].to_string(), p)),
                _ => rows.push((id, vec![(rec[1].to_string(), p)])),
            }
        }
        let channels: Vec<String> =
            rows.first().map(|(_, c)| c.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
        let mut out = Vec::with_capacity(rows.len());
        for (id, cells) in rows {
            if cells.len() != channels.len() || cells.iter().zip(&channels).any(|((n, _), c)| n != c) {
                return Err(SpectralError::Table(format!("subject {id} has a different channel list")));
            }
            out.push((id, cells.into_iter().map(|(_, p)| p).collect()));
        }
        Self::from_rows(channels, out)
    }
}

/// Decimal rendering with 17 significant digits.
fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.1}");
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (16 - exp).max(1) as usize;
    format!("{x:.decimals$}")
}

/// Log band powers z-scored with statistics of the training subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedFeatures {
    pub subject_ids: Vec<String>,
    pub channels: Vec<String>,
    /// `[subjects x channels]` 4-vectors.
    pub values: Vec<[f64; 4]>,
    /// Per-(channel, band) train mean of `log10(P + eps)`.
    pub mean: Vec<[f64; 4]>,
    /// Per-(channel, band) train standard deviation (population).
    pub std: Vec<[f64; 4]>,
}

impl NormalizedFeatures {
    pub fn row(&self, subject: usize) -> &[[f64; 4]] {
        let c = self.channels.len();
        &self.values[subject * c..(subject + 1) * c]
    }

    pub fn subject_index(&self, id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == id)
    }
}

/// Fits per-(channel, band) log-power statistics on `train_ids` and applies
/// them to every row.
pub fn normalize_features(table: &BandPowerTable, train_ids: &[String]) -> Result<NormalizedFeatures, SpectralError> {
    let index: HashMap<&str, usize> = table.subject_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let train: Vec<usize> = train_ids
        .iter()
        .map(|id| index.get(id.as_str()).copied().ok_or_else(|| SpectralError::UnknownSubject(id.clone())))
        .collect::<Result<_, _>>()?;
    if train.is_empty() {
        return Err(SpectralError::Invalid("no training subjects".into()));
    }
    let n_ch = table.channels.len();
    let log = |p: f64| (p + LOG_EPS).log10();
    for &s in &train {
        for c in 0..n_ch {
            if table.get(s, c).iter().any(|p| *p <= 0.0) {
                return Err(SpectralError::NonPositivePower {
                    subject: table.subject_ids[s].clone(),
                    channel: table.channels[c].clone(),
                });
            }
        }
    }
    let nt = train.len() as f64;
    let mut mean = vec![[0.0; 4]; n_ch];
    let mut std = vec![[0.0; 4]; n_ch];
    for c in 0..n_ch {
        for b in 0..4 {
            let m = train.iter().map(|&s| log(table.get(s, c)[b])).sum::<f64>() / nt;
            let var = train.iter().map(|&s| (log(table.get(s, c)[b]) - m).powi(2)).sum::<f64>() / nt;
            if var <= 0.0 {
                return Err(SpectralError::DegenerateFeature {
                    channel: table.channels[c].clone(),
                    band: Band::ALL[b],
                });
            }
            mean[c][b] = m;
            std[c][b] = var.sqrt();
        }
    }
    let values = table
        .powers
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = i % n_ch;
            std::array::from_fn(|b| (log(p[b]) - mean[c][b]) / std[c][b])
        })
        .collect();
    Ok(NormalizedFeatures {
        subject_ids: table.subject_ids.clone(),
        channels: table.channels.clone(),
        values,
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_sig_has_at_least_nine_significant_digits() {
        for x in [1.5, 12.345, 0.000123456789, 98765.4321, 3.0e-7] {
            let s = fmt_sig(x);
            let digits = s.trim_start_matches(['0', '.']).chars().filter(char::is_ascii_digit).count();
            assert!(digits >= 9, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    fn table() -> BandPowerTable {
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let ch = vec!["C1".to_string()];
        let powers = vec![[1.0, 2.0, 3.0, 4.0], [10.0, 20.0, 30.0, 40.0], [100.0, 5.0, 0.5, 0.25]];
        BandPowerTable::new(ids, ch, powers).unwrap()
    }

    #[test]
    fn held_out_row_uses_train_statistics() {
        let t = table();
        let n = normalize_features(&t, &["a".into(), "b".into()]).unwrap();
        // theta: logs 0 and 1 -> mean 0.5, std 0.5; held-out log10(100) = 2
        let expected = ((100.0f64 + LOG_EPS).log10() - 0.5) / 0.5;
        assert!((n.values[2][0] - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let t = BandPowerTable::new(ids.clone(), vec!["Oz".into()], vec![[1.0, 1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]])
            .unwrap();
        assert!(matches!(
            normalize_features(&t, &ids),
            Err(SpectralError::DegenerateFeature { band: Band::Theta, .. })
        ));
    }

    #[test]
    fn zero_power_in_training_row_is_an_error() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let t = BandPowerTable::new(ids.clone(), vec!["Oz".into()], vec![[0.0, 1.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0]])
            .unwrap();
        assert!(matches!(normalize_features(&t, &ids), Err(SpectralError::NonPositivePower { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subject_id,channel,theta,alpha,beta,gamma\n"));
        assert_eq!(BandPowerTable::read_csv(&buf[..]).unwrap(), t);
    }
}
