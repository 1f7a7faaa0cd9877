//! Synthetic resting-state cohorts.
//!
//! Each channel is a sum of Hann-windowed sinusoidal bursts, one burst train
//! per frequency band, plus white noise. Group differences are injected by
//! multiplying band amplitudes on chosen channels (`BandSignature`), and by
//! shifting the PDFOG+ demographic distributions away from PDFOG-; both are
//! scaled by a single `effect_size` knob. With `effect_size = 0` the two
//! Parkinson's groups are drawn from identical distributions and no group
//! differs in its EEG.
//!
//! Every subject and channel draws from its own named random stream, so a
//! subset of channels can be generated without the others and still matches
//! the full cohort sample for sample.

use super::{
    save_manifest, standard_63, write_signal, CohortManifest, CorpusError, Group, ParticipantRecord, Recording, Result,
    SignalMatrix, MANIFEST_VERSION, PRESET_RANKED_16,
};
use crate::rng::{self, StreamRng};
use crate::spectral::{Band, BandDef};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

const AGE_RANGE: (f64, f64) = (40.0, 95.0);
const SCHOOLING_RANGE: (f64, f64) = (0.0, 25.0);
const DURATION_RANGE: (f64, f64) = (0.5, 30.0);

/// Gap between bursts and burst length, seconds.
const BURST_GAP_S: (f64, f64) = (0.1, 0.6);
const BURST_LEN_S: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

impl Normal {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    fn sample_clipped(&self, rng: &mut StreamRng, (lo, hi): (f64, f64)) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (self.mean + self.sd * z).clamp(lo, hi)
    }

    /// `self + e * (other - self)` for both moments.
    fn towards(&self, other: &Normal, e: f64) -> Normal {
        Normal { mean: self.mean + e * (other.mean - self.mean), sd: self.sd + e * (other.sd - self.sd) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDemographics {
    pub group: Group,
    pub count: usize,
    pub age: Normal,
    pub schooling: Normal,
    /// `None` for healthy controls.
    pub disease_duration: Option<Normal>,
}

/// Amplitude multiplier for one band on one channel in one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSignature {
    pub group: Group,
    pub channel: String,
    pub band: Band,
    /// Applied as `gain.powf(effect_size)`.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub groups: Vec<GroupDemographics>,
    pub channels: Vec<String>,
    pub sampling_rate_hz: f64,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Peak burst amplitude per band (theta, alpha, beta, gamma), microvolts.
    pub band_amplitude_uv: [f64; 4],
    /// Standard deviation of the per-subject, per-channel, per-band log-amplitude jitter.
    pub channel_jitter: f64,
    /// Standard deviation of the per-subject log-amplitude factor shared by all channels.
    pub subject_jitter: f64,
    pub noise_uv: f64,
    pub signatures: Vec<BandSignature>,
    pub effect_size: f64,
}

impl Default for SyntheticSpec {
    /// Default cohort: 41 HC, 41 PDFOG-, 42 PDFOG+,
    /// 63 channels at 500 Hz, 120-180 s per recording. PDFOG+ subjects carry
    /// stronger theta and beta bursts on eight channels.
    fn default() -> Self {
        let informative: Vec<String> = PRESET_RANKED_16[..8].iter().map(|s| s.to_string()).collect();
        Self::study_shaped().with_signatures(&informative, &[(Band::Theta, 1.5), (Band::Beta, 1.5)])
    }
}

impl SyntheticSpec {
    /// Study-shaped cohort without any EEG signature.
    pub fn study_shaped() -> Self {
        Self {
            groups: vec![
                GroupDemographics {
                    group: Group::HealthyControl,
                    count: 41,
                    age: Normal::new(71.3, 7.6),
                    schooling: Normal::new(16.6, 2.2),
                    disease_duration: None,
                },
                GroupDemographics {
                    group: Group::PdFogMinus,
                    count: 41,
                    age: Normal::new(68.2, 7.6),
                    schooling: Normal::new(15.1, 3.5),
                    disease_duration: Some(Normal::new(4.2, 3.2)),
                },
                GroupDemographics {
                    group: Group::PdFogPlus,
                    count: 42,
                    age: Normal::new(69.0, 8.3),
                    schooling: Normal::new(15.6, 3.2),
                    disease_duration: Some(Normal::new(5.9, 4.4)),
                },
            ],
            channels: standard_63(),
            sampling_rate_hz: 500.0,
            min_duration_s: 120.0,
            max_duration_s: 180.0,
            band_amplitude_uv: [6.0, 8.0, 4.0, 2.0],
            channel_jitter: 0.3,
            subject_jitter: 0.2,
            noise_uv: 2.0,
            signatures: Vec::new(),
            effect_size: 1.0,
        }
    }

    /// Replaces the signatures: every listed channel gets every `(band, gain)` pair for PDFOG+.
    pub fn with_signatures(mut self, channels: &[String], gains: &[(Band, f64)]) -> Self {
        self.signatures = channels
            .iter()
            .flat_map(|ch| {
                gains.iter().map(|&(band, gain)| BandSignature {
                    group: Group::PdFogPlus,
                    channel: ch.clone(),
                    band,
                    gain,
                })
            })
            .collect();
        self
    }

    pub fn n_subjects(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.groups.is_empty() {
            return bad("no groups".into());
        }
        let mut seen = HashSet::new();
        for g in &self.groups {
            if g.count == 0 {
                return bad(format!("group {} is empty", g.group));
            }
            if !seen.insert(g.group) {
                return bad(format!("group {} listed twice", g.group));
            }
            for n in [Some(&g.age), Some(&g.schooling), g.disease_duration.as_ref()].into_iter().flatten() {
                if !n.mean.is_finite() || !(n.sd >= 0.0) {
                    return bad(format!("group {}: invalid distribution {n:?}", g.group));
                }
            }
        }
        if self.channels.is_empty() {
            return bad("no channels".into());
        }
        let mut names = HashSet::new();
        for ch in &self.channels {
            if !names.insert(ch.as_str()) {
                return bad(format!("duplicate channel {ch}"));
            }
        }
        let top = BandDef::standard()[3].f_hi;
        if !(self.sampling_rate_hz > 2.0 * top) {
            return bad(format!("sampling rate {} Hz cannot represent {top} Hz", self.sampling_rate_hz));
        }
        if !(self.min_duration_s >= 2.0 && self.min_duration_s <= self.max_duration_s) {
            return bad(format!("duration range [{}, {}] s", self.min_duration_s, self.max_duration_s));
        }
        if self.band_amplitude_uv.iter().any(|a| !(*a >= 0.0))
            || !(self.channel_jitter >= 0.0)
            || !(self.subject_jitter >= 0.0)
            || !(self.noise_uv >= 0.0)
            || !self.effect_size.is_finite()
        {
            return bad("amplitudes, jitters, noise and effect size must be finite and nonnegative".into());
        }
        for s in &self.signatures {
            if !names.contains(s.channel.as_str()) {
                return bad(format!("signature on unknown channel {}", s.channel));
            }
            if !(s.gain > 0.0) || !s.gain.is_finite() {
                return bad(format!("signature gain {} must be positive", s.gain));
            }
        }
        Ok(())
    }

    /// Demographic distributions actually sampled for `group`, after applying the effect size.
    fn effective_demographics(&self, group: Group) -> GroupDemographics {
        let find = |g: Group| self.groups.iter().find(|d| d.group == g);
        let own = find(group).expect("group present").clone();
        if group != Group::PdFogPlus {
            return own;
        }
        let Some(reference) = find(Group::PdFogMinus) else { return own };
        let e = self.effect_size;
        let duration = match (reference.disease_duration, own.disease_duration) {
            (Some(r), Some(o)) => Some(r.towards(&o, e)),
            (_, o) => o,
        };
        GroupDemographics {
            group,
            count: own.count,
            age: reference.age.towards(&own.age, e),
            schooling: reference.schooling.towards(&own.schooling, e),
            disease_duration: duration,
        }
    }

    /// Amplitude multiplier for `(group, channel, band)`.
    fn gain(&self, group: Group, channel: &str, band: Band) -> f64 {
        self.signatures
            .iter()
            .filter(|s| s.group == group && s.channel == channel && s.band == band)
            .map(|s| s.gain.powf(self.effect_size))
            .product()
    }
}

/// Demographics and per-subject random state of a generated cohort. Signals are
/// synthesized on demand by [`SyntheticCohort::recording`].
#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub spec: SyntheticSpec,
    pub seed: u64,
    pub participants: Vec<ParticipantRecord>,
    n_samples: Vec<usize>,
    subject_gain: Vec<f64>,
}

impl SyntheticCohort {
    pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let n = spec.n_subjects();
        let mut groups: Vec<Group> = spec.groups.iter().flat_map(|g| std::iter::repeat_n(g.group, g.count)).collect();
        groups.shuffle(&mut rng::stream(seed, "synth/assign"));

        let mut participants = Vec::with_capacity(n);
        let mut n_samples = Vec::with_capacity(n);
        let mut subject_gain = Vec::with_capacity(n);
        for (i, group) in groups.into_iter().enumerate() {
            let id = format!("sub-{:03}", i + 1);
            let demo = spec.effective_demographics(group);
            let mut r = rng::stream(seed, &format!("synth/demo/{id}"));
            let age = demo.age.sample_clipped(&mut r, AGE_RANGE);
            let schooling = demo.schooling.sample_clipped(&mut r, SCHOOLING_RANGE);
            let disease_duration = demo.disease_duration.map(|d| d.sample_clipped(&mut r, DURATION_RANGE));

            let mut r = rng::stream(seed, &format!("synth/duration/{id}"));
            let dur = if spec.max_duration_s > spec.min_duration_s {
                r.random_range(spec.min_duration_s..spec.max_duration_s)
            } else {
                spec.min_duration_s
            };
            n_samples.push((dur * spec.sampling_rate_hz).round() as usize);

            let mut r = rng::stream(seed, &format!("synth/subject/{id}"));
            let z: f64 = StandardNormal.sample(&mut r);
            subject_gain.push((spec.subject_jitter * z).exp());

            participants.push(ParticipantRecord { id, group, age, schooling, disease_duration });
        }
        Ok(Self { spec: spec.clone(), seed, participants, n_samples, subject_gain })
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn n_samples(&self, idx: usize) -> usize {
        self.n_samples[idx]
    }

    /// Synthesizes subject `idx`, either on all channels or on the named subset (in the given order).
    pub fn recording(&self, idx: usize, channels: Option<&[String]>) -> Result<Recording> {
        let p = &self.participants[idx];
        let channels: Vec<String> = match channels {
            Some(c) => c.to_vec(),
            None => self.spec.channels.clone(),
        };
        let n = self.n_samples[idx];
        let mut data = vec![0.0f32; channels.len() * n];
        for (c, ch) in channels.iter().enumerate() {
            if !self.spec.channels.contains(ch) {
                return Err(CorpusError::InvalidSpec(format!("unknown channel {ch}")));
            }
            let row = self.channel_signal(p, self.subject_gain[idx], ch, n);
            data[c * n..(c + 1) * n].copy_from_slice(&row);
        }
        let matrix = SignalMatrix::new(channels.len(), n, data)?;
        Recording::new(channels, self.spec.sampling_rate_hz, matrix)
    }

    fn channel_signal(&self, p: &ParticipantRecord, subject_gain: f64, channel: &str, n: usize) -> Vec<f32> {
        let spec = &self.spec;
        let fs = spec.sampling_rate_hz;
        let mut r = rng::stream(self.seed, &format!("synth/signal/{}/{channel}", p.id));
        let mut x = vec![0.0f64; n];
        let bands = BandDef::standard();
        let jitter: [f64; 4] = std::array::from_fn(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            (spec.channel_jitter * z).exp()
        });
        for (b, def) in bands.iter().enumerate() {
            let amp = spec.band_amplitude_uv[b] * jitter[b] * subject_gain * spec.gain(p.group, channel, def.band);
            if amp == 0.0 {
                continue;
            }
            let mut t = (r.random_range(0.0..BURST_GAP_S.1) * fs) as usize;
            while t < n {
                let len = ((r.random_range(BURST_LEN_S.0..BURST_LEN_S.1) * fs) as usize).max(2);
                let f = r.random_range(def.f_lo..def.f_hi);
                let phase = r.random_range(0.0..std::f64::consts::TAU);
                add_burst(&mut x[t..(t + len).min(n)], len, amp, f / fs, phase);
                t += len + (r.random_range(BURST_GAP_S.0..BURST_GAP_S.1) * fs) as usize;
            }
        }
        x.iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut r);
                (v + spec.noise_uv * z) as f32
            })
            .collect()
    }

    /// Manifest describing the cohort as written by [`SyntheticCohort::write`].
    pub fn manifest(&self, base_dir: &Path) -> CohortManifest {
        CohortManifest {
            participants: self.participants.clone(),
            sampling_rate: self.spec.sampling_rate_hz,
            channel_names: self.spec.channels.clone(),
            signal_file_map: self
                .participants
                .iter()
                .map(|p| (p.id.clone(), format!("signals/{}.bsig", p.id)))
                .collect::<BTreeMap<_, _>>(),
            format_version: MANIFEST_VERSION,
            base_dir: base_dir.to_path_buf(),
        }
    }

    /// Writes `manifest.json` and `signals/*.bsig` under `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<CohortManifest> {
        let signals = out_dir.join("signals");
        std::fs::create_dir_all(&signals).map_err(|source| CorpusError::Io { path: signals.clone(), source })?;
        let manifest = self.manifest(out_dir);
        for (i, p) in self.participants.iter().enumerate() {
            let rec = self.recording(i, None)?;
            write_signal(manifest.signal_path(&p.id)?, &rec.to_matrix())?;
        }
        save_manifest(&manifest, out_dir.join("manifest.json"))?;
        Ok(manifest)
    }
}

/// Adds `amp * hann(i / len) * cos(2 pi f i + phase)` over `out`, which may be
/// shorter than `len` when the burst runs past the end of the recording.
/// Both oscillators advance by complex rotation.
fn add_burst(out: &mut [f64], len: usize, amp: f64, cycles_per_sample: f64, phase: f64) {
    let (ds, dc) = (std::f64::consts::TAU * cycles_per_sample).sin_cos();
    let (es, ec) = (std::f64::consts::TAU / len as f64).sin_cos();
    let (mut s, mut c) = phase.sin_cos();
    let (mut hs, mut hc) = (0.0f64, 1.0f64);
    for v in out.iter_mut() {
        *v += amp * 0.5 * (1.0 - hc) * c;
        (c, s) = (c * dc - s * ds, s * dc + c * ds);
        (hc, hs) = (hc * ec - hs * es, hs * ec + hc * es);
    }
}

/// Generates a cohort from `spec` and writes it to `out_dir`.
pub fn generate_synthetic_cohort(spec: &SyntheticSpec, seed: u64, out_dir: &Path) -> Result<CohortManifest> {
    SyntheticCohort::generate(spec, seed)?.write(out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SyntheticSpec {
        let mut s = SyntheticSpec::default();
        for g in &mut s.groups {
            g.count = 3;
        }
        s.channels = PRESET_RANKED_16[..4].iter().map(|c| c.to_string()).collect();
        s.signatures.retain(|sig| s.channels.contains(&sig.channel));
        s.min_duration_s = 4.0;
        s.max_duration_s = 6.0;
        s
    }

    #[test]
    fn burst_matches_direct_formula() {
        let mut fast = vec![0.0; 300];
        add_burst(&mut fast, 300, 2.0, 0.03, 0.4);
        for (i, v) in fast.iter().enumerate() {
            let hann = 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / 300.0).cos());
            let direct = 2.0 * hann * (std::f64::consts::TAU * 0.03 * i as f64 + 0.4).cos();
            assert!((v - direct).abs() < 1e-9, "{i}: {v} vs {direct}");
        }
    }

    #[test]
    fn study_shaped_counts_and_demographics() {
        let c = SyntheticCohort::generate(&SyntheticSpec::default(), 3).unwrap();
        assert_eq!(c.len(), 124);
        let count = |g| c.participants.iter().filter(|p| p.group == g).count();
        assert_eq!((count(Group::HealthyControl), count(Group::PdFogMinus), count(Group::PdFogPlus)), (41, 41, 42));
        for p in &c.participants {
            assert_eq!(p.disease_duration.is_none(), p.group == Group::HealthyControl);
            assert!(p.validate().is_ok());
            let n = c.n_samples(c.participants.iter().position(|q| q.id == p.id).unwrap());
            assert!((60_000..=90_000).contains(&n));
        }
    }

    #[test]
    fn channel_subset_matches_full_generation() {
        let c = SyntheticCohort::generate(&small_spec(), 9).unwrap();
        let full = c.recording(1, None).unwrap();
        let pick = vec![c.spec.channels[2].clone()];
        let sub = c.recording(1, Some(&pick)).unwrap();
        assert_eq!(sub.channel(0), full.channel(2));
    }

    #[test]
    fn empty_group_is_rejected() {
        let mut s = small_spec();
        s.groups[1].count = 0;
        assert!(matches!(SyntheticCohort::generate(&s, 1), Err(CorpusError::InvalidSpec(_))));
    }

    #[test]
    fn zero_effect_makes_parkinson_groups_identical_in_distribution() {
        let mut s = small_spec();
        s.effect_size = 0.0;
        assert_eq!(s.effective_demographics(Group::PdFogPlus).age, s.effective_demographics(Group::PdFogMinus).age);
        assert_eq!(s.gain(Group::PdFogPlus, &s.channels[0], Band::Beta), 1.0);
    }
}
