//! Seeded synthetic cohort generator.
//!
//! Each subject has a per-band log-magnitude baseline drawn around a
//! population mean. Traits the subject holds add fixed log-space shifts to
//! chosen bands, scaled by a global effect scale. Each emotion adds a
//! further population shift plus a small per-subject jitter. Rows within a
//! segment are i.i.d. log-normal:
//!
//! ```text
//! value = clamp(round(exp(N(base_log_mean[b] + emotion_shift[e][b], base_log_std[b]))), 0, 2^24 - 1)
//! ```
//!
//! Random streams are split per subject with [`crate::seed::derive`]:
//! `[0, i]` draws subject `i`'s labels, `[1, i]` its physiology and
//! `[2, i]` is the base seed for its segments. Labels therefore never
//! perturb physiology draws, which makes an effect scale of zero a true
//! null: band statistics are independent of every label.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codec::{self, DataRow, EncodeError};
use crate::seed;
use crate::types::{
    Band, BandPowerRow, Emotion, Segment, Trait, TraitLabels, MAX_BAND_VALUE, NUM_BANDS,
};

pub const DEFAULT_ROWS_PER_SECOND: u32 = 1;
pub const DEFAULT_SEGMENT_SECONDS: u32 = 120;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("rows_per_second must be in 1..=1000, got {0}")]
    InvalidRate(u32),
    #[error("segment duration must be at least one second")]
    InvalidDuration,
    #[error("cohort needs at least one subject")]
    EmptyCohort,
    #[error("profile {subject}: {reason}")]
    InvalidProfile { subject: String, reason: String },
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

/// Log-space shift applied to `bands` when a trait is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitEffect {
    pub bands: Vec<Band>,
    pub shift: f64,
}

/// How strongly, and where, traits leave a mark on band powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectConfig {
    pub effects: BTreeMap<Trait, TraitEffect>,
    /// Multiplies every shift. Zero removes all trait signal.
    pub scale: f64,
    /// Probability that a subject holds each trait.
    pub positive_rate: f64,
}

/// Named effect scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectScale {
    Null,
    Weak,
    Moderate,
    Strong,
    Custom(f64),
}

impl EffectScale {
    pub fn value(self) -> f64 {
        match self {
            EffectScale::Null => 0.0,
            EffectScale::Weak => 0.25,
            EffectScale::Moderate => 0.5,
            EffectScale::Strong => 1.0,
            EffectScale::Custom(v) => v,
        }
    }
}

impl std::str::FromStr for EffectScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(EffectScale::Null),
            "weak" => Ok(EffectScale::Weak),
            "moderate" => Ok(EffectScale::Moderate),
            "strong" => Ok(EffectScale::Strong),
            other => match other.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.is_finite() => Ok(EffectScale::Custom(v)),
                _ => Err(format!(
                    "expected null|weak|moderate|strong or a non-negative number, got `{other}`"
                )),
            },
        }
    }
}

impl EffectConfig {
    /// The documented default layout.
    ///
    /// Bands delta through high beta each carry two traits, one shifting
    /// by `2` and one by `1`, so the four combinations land on distinct
    /// levels `0, 1, 2, 3`. The two remaining traits both span the gamma
    /// bands with shifts `1` and `2`.
    pub fn with_scale(scale: EffectScale) -> Self {
        use Trait::*;
        let heavy = [
            ReligiousBeliefs,
            PhysicalExercise,
            FamilyHeartDisease,
            Smoking,
            ReligiousPractice,
            FamilyDiabetes,
        ];
        let light = [
            FamilyBrainStroke,
            FastFood,
            HighFat,
            HighSugar,
            OutdoorGames,
            SleepIssues,
        ];
        let mut effects = BTreeMap::new();
        for (i, band) in Band::ALL.into_iter().take(6).enumerate() {
            effects.insert(
                heavy[i],
                TraitEffect {
                    bands: vec![band],
                    shift: 2.0,
                },
            );
            effects.insert(
                light[i],
                TraitEffect {
                    bands: vec![band],
                    shift: 1.0,
                },
            );
        }
        effects.insert(
            RegularSleepPattern,
            TraitEffect {
                bands: vec![Band::LowGamma, Band::MidGamma],
                shift: 1.0,
            },
        );
        effects.insert(
            VegetableConsumption,
            TraitEffect {
                bands: vec![Band::LowGamma, Band::MidGamma],
                shift: 2.0,
            },
        );
        Self {
            effects,
            scale: scale.value(),
            positive_rate: 0.5,
        }
    }
}

impl Default for EffectConfig {
    fn default() -> Self {
        Self::with_scale(EffectScale::Strong)
    }
}

/// Population-level parameters shared by every subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    /// Mean log magnitude per band.
    pub log_mean: [f64; NUM_BANDS],
    /// Between-subject standard deviation of the log baseline.
    pub between_subject_sd: f64,
    /// Within-segment log standard deviation of a row.
    pub row_log_std: f64,
    /// Relative per-subject jitter of `row_log_std`, uniform in `±jitter`.
    pub row_log_std_jitter: f64,
    /// Population emotion shift per band, in [`Emotion::ALL`] order.
    pub emotion_shift: [[f64; NUM_BANDS]; 4],
    pub emotion_jitter_sd: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            log_mean: [10.5, 10.2, 9.8, 9.6, 9.4, 9.2, 8.6, 8.2],
            between_subject_sd: 0.15,
            row_log_std: 0.5,
            row_log_std_jitter: 0.1,
            emotion_shift: [
                [0.10, 0.10, 0.15, 0.15, 0.10, 0.10, 0.05, 0.05],
                [-0.10, -0.05, -0.10, -0.10, -0.05, -0.05, -0.05, -0.05],
                [0.0; NUM_BANDS],
                [0.05, 0.20, 0.25, 0.20, -0.10, -0.15, -0.15, -0.15],
            ],
            emotion_jitter_sd: 0.05,
        }
    }
}

/// Generative parameters of one synthetic subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub labels: TraitLabels,
    pub base_log_mean: [f64; NUM_BANDS],
    pub base_log_std: [f64; NUM_BANDS],
    pub emotion_shift: BTreeMap<Emotion, [f64; NUM_BANDS]>,
    /// Base seed for this subject's segments.
    pub seed: u64,
}

impl SubjectProfile {
    /// Seed used by [`generate_segment`] for the given emotion.
    pub fn segment_seed(&self, emotion: Emotion) -> u64 {
        seed::derive(self.seed, &[emotion.index() as u64])
    }

    fn validate(&self) -> Result<(), SimError> {
        let bad = |reason: &str| SimError::InvalidProfile {
            subject: self.subject_id.clone(),
            reason: reason.to_string(),
        };
        if self
            .base_log_std
            .iter()
            .any(|&s| !(s > 0.0 && s.is_finite()))
        {
            return Err(bad("base_log_std must be positive and finite"));
        }
        if self.base_log_mean.iter().any(|m| !m.is_finite()) {
            return Err(bad("base_log_mean must be finite"));
        }
        if Emotion::ALL
            .iter()
            .any(|e| !self.emotion_shift.contains_key(e))
        {
            return Err(bad("emotion_shift must cover all four emotions"));
        }
        Ok(())
    }

    /// Generate all four emotion segments with the profile's own seeds.
    pub fn generate_session(
        &self,
        duration_s: u32,
        rows_per_second: u32,
    ) -> Result<Vec<Segment>, SimError> {
        Emotion::ALL
            .into_iter()
            .map(|e| generate_segment(self, e, duration_s, rows_per_second, self.segment_seed(e)))
            .collect()
    }
}

pub fn subject_id(index: usize) -> String {
    format!("S{:03}", index + 1)
}

/// Draw `n_subjects` profiles from the default population.
pub fn sample_cohort(
    n_subjects: usize,
    effects: &EffectConfig,
    seed: u64,
) -> Result<Vec<SubjectProfile>, SimError> {
    sample_cohort_with(n_subjects, &PopulationConfig::default(), effects, seed)
}

pub fn sample_cohort_with(
    n_subjects: usize,
    population: &PopulationConfig,
    effects: &EffectConfig,
    seed: u64,
) -> Result<Vec<SubjectProfile>, SimError> {
    if n_subjects == 0 {
        return Err(SimError::EmptyCohort);
    }
    Ok((0..n_subjects)
        .map(|i| sample_subject(i, population, effects, seed))
        .collect())
}

fn sample_subject(
    index: usize,
    population: &PopulationConfig,
    effects: &EffectConfig,
    seed: u64,
) -> SubjectProfile {
    let i = index as u64;

    let mut label_rng = seed::rng(seed::derive(seed, &[0, i]));
    let mut labels = TraitLabels::default();
    for t in Trait::ALL {
        labels.set(
            t,
            label_rng.random_bool(effects.positive_rate.clamp(0.0, 1.0)),
        );
    }

    let mut rng = seed::rng(seed::derive(seed, &[1, i]));
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut base_log_mean = population.log_mean;
    for m in &mut base_log_mean {
        *m += population.between_subject_sd * std_normal.sample(&mut rng);
    }
    let mut base_log_std = [population.row_log_std; NUM_BANDS];
    for s in &mut base_log_std {
        let jitter = population.row_log_std_jitter;
        *s *= 1.0 + rng.random_range(-1.0..=1.0) * jitter;
    }
    let mut emotion_shift = BTreeMap::new();
    for e in Emotion::ALL {
        let mut shift = population.emotion_shift[e.index()];
        for s in &mut shift {
            *s += population.emotion_jitter_sd * std_normal.sample(&mut rng);
        }
        emotion_shift.insert(e, shift);
    }

    for (t, effect) in &effects.effects {
        if labels.get(*t) {
            for b in &effect.bands {
                base_log_mean[b.index()] += effects.scale * effect.shift;
            }
        }
    }

    SubjectProfile {
        subject_id: subject_id(index),
        labels,
        base_log_mean,
        base_log_std,
        emotion_shift,
        seed: seed::derive(seed, &[2, i]),
    }
}

/// Timestamp of the `index`-th row at a fixed cadence.
pub fn row_timestamp(index: u64, rows_per_second: u32) -> u64 {
    index * 1000 / rows_per_second as u64
}

/// Draw `duration_s * rows_per_second` rows for one emotion phase.
pub fn generate_segment(
    profile: &SubjectProfile,
    emotion: Emotion,
    duration_s: u32,
    rows_per_second: u32,
    seed: u64,
) -> Result<Segment, SimError> {
    if duration_s == 0 {
        return Err(SimError::InvalidDuration);
    }
    if rows_per_second == 0 || rows_per_second > 1000 {
        return Err(SimError::InvalidRate(rows_per_second));
    }
    profile.validate()?;

    let shift = profile.emotion_shift[&emotion];
    let dists: Vec<Normal<f64>> = (0..NUM_BANDS)
        .map(|b| {
            Normal::new(profile.base_log_mean[b] + shift[b], profile.base_log_std[b])
                .expect("validated parameters")
        })
        .collect();

    let mut rng = seed::rng(seed);
    let n = duration_s as u64 * rows_per_second as u64;
    let rows = (0..n)
        .map(|k| {
            let mut bands = [0u32; NUM_BANDS];
            for (v, d) in bands.iter_mut().zip(&dists) {
                *v = d
                    .sample(&mut rng)
                    .exp()
                    .round()
                    .clamp(0.0, MAX_BAND_VALUE as f64) as u32;
            }
            BandPowerRow::new(row_timestamp(k, rows_per_second), bands)
        })
        .collect();
    Ok(Segment::new(profile.subject_id.clone(), emotion, rows))
}

/// One EEG-power packet per row, concatenated.
pub fn segment_to_wire(segment: &Segment) -> Result<Vec<u8>, SimError> {
    let mut out = Vec::with_capacity(segment.rows.len() * 30);
    for row in &segment.rows {
        out.extend(codec::encode_packet(&[DataRow::eeg_power(&row.bands)?])?);
    }
    Ok(out)
}
