//! Shared domain types: bands, emotions, traits and band-power rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of band-power channels emitted by the headset.
pub const NUM_BANDS: usize = 8;

/// Largest magnitude representable in a 3-byte band-power field.
pub const MAX_BAND_VALUE: u32 = (1 << 24) - 1;

/// EEG frequency bands in the order the headset emits them.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// 0.5 - 2.75 Hz
    Delta,
    /// 3.5 - 6.75 Hz
    Theta,
    /// 7.5 - 9.25 Hz
    LowAlpha,
    /// 10 - 11.75 Hz
    HighAlpha,
    /// 13 - 16.75 Hz
    LowBeta,
    /// 18 - 29.75 Hz
    HighBeta,
    /// 31 - 39.75 Hz
    LowGamma,
    /// 41 - 49.75 Hz
    MidGamma,
}

impl Band {
    pub const ALL: [Band; NUM_BANDS] = [
        Band::Delta,
        Band::Theta,
        Band::LowAlpha,
        Band::HighAlpha,
        Band::LowBeta,
        Band::HighBeta,
        Band::LowGamma,
        Band::MidGamma,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::LowAlpha => "low_alpha",
            Band::HighAlpha => "high_alpha",
            Band::LowBeta => "low_beta",
            Band::HighBeta => "high_beta",
            Band::LowGamma => "low_gamma",
            Band::MidGamma => "mid_gamma",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Emotion-elicitation phase. Declaration order is the recording order and
/// the tie-break order used everywhere.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Happy,
    Sad,
    Neutral,
    Meditation,
}

impl Emotion {
    pub const ALL: [Emotion; 4] = [
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Neutral,
        Emotion::Meditation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Neutral => "neutral",
            Emotion::Meditation => "meditation",
        }
    }

    /// The phase recorded after this one, if any.
    pub fn next(self) -> Option<Emotion> {
        Emotion::ALL.get(self.index() + 1).copied()
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} name `{name}`")]
pub struct ParseNameError {
    kind: &'static str,
    name: String,
}

impl FromStr for Emotion {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ParseNameError {
                kind: "emotion",
                name: s.to_string(),
            })
    }
}

/// The fourteen binary traits and behaviours identified from band powers.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    ReligiousPractice,
    Smoking,
    ReligiousBeliefs,
    PhysicalExercise,
    FamilyDiabetes,
    FamilyHeartDisease,
    FamilyBrainStroke,
    FastFood,
    HighFat,
    HighSugar,
    OutdoorGames,
    SleepIssues,
    RegularSleepPattern,
    VegetableConsumption,
}

pub const NUM_TRAITS: usize = 14;

impl Trait {
    pub const ALL: [Trait; NUM_TRAITS] = [
        Trait::ReligiousPractice,
        Trait::Smoking,
        Trait::ReligiousBeliefs,
        Trait::PhysicalExercise,
        Trait::FamilyDiabetes,
        Trait::FamilyHeartDisease,
        Trait::FamilyBrainStroke,
        Trait::FastFood,
        Trait::HighFat,
        Trait::HighSugar,
        Trait::OutdoorGames,
        Trait::SleepIssues,
        Trait::RegularSleepPattern,
        Trait::VegetableConsumption,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Trait::ReligiousPractice => "religious_practice",
            Trait::Smoking => "smoking",
            Trait::ReligiousBeliefs => "religious_beliefs",
            Trait::PhysicalExercise => "physical_exercise",
            Trait::FamilyDiabetes => "family_diabetes",
            Trait::FamilyHeartDisease => "family_heart_disease",
            Trait::FamilyBrainStroke => "family_brain_stroke",
            Trait::FastFood => "fast_food",
            Trait::HighFat => "high_fat",
            Trait::HighSugar => "high_sugar",
            Trait::OutdoorGames => "outdoor_games",
            Trait::SleepIssues => "sleep_issues",
            Trait::RegularSleepPattern => "regular_sleep_pattern",
            Trait::VegetableConsumption => "vegetable_consumption",
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Trait {
    type Err = ParseNameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Trait::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| ParseNameError {
                kind: "trait",
                name: s.to_string(),
            })
    }
}

/// Ground-truth survey answers, one boolean per [`Trait`].
///
/// Serialized as a flat object with one field per trait name; every field
/// is required on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "LabelFields", from = "LabelFields")]
pub struct TraitLabels([bool; NUM_TRAITS]);

impl TraitLabels {
    pub fn new(values: [bool; NUM_TRAITS]) -> Self {
        Self(values)
    }

    pub fn get(&self, t: Trait) -> bool {
        self.0[t.index()]
    }

    pub fn set(&mut self, t: Trait, value: bool) {
        self.0[t.index()] = value;
    }

    pub fn as_array(&self) -> &[bool; NUM_TRAITS] {
        &self.0
    }
}

// Serde shim so the JSON form carries named fields.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelFields {
    religious_practice: bool,
    smoking: bool,
    religious_beliefs: bool,
    physical_exercise: bool,
    family_diabetes: bool,
    family_heart_disease: bool,
    family_brain_stroke: bool,
    fast_food: bool,
    high_fat: bool,
    high_sugar: bool,
    outdoor_games: bool,
    sleep_issues: bool,
    regular_sleep_pattern: bool,
    vegetable_consumption: bool,
}

impl From<TraitLabels> for LabelFields {
    fn from(l: TraitLabels) -> Self {
        let [a, b, c, d, e, f, g, h, i, j, k, m, n, o] = l.0;
        LabelFields {
            religious_practice: a,
            smoking: b,
            religious_beliefs: c,
            physical_exercise: d,
            family_diabetes: e,
            family_heart_disease: f,
            family_brain_stroke: g,
            fast_food: h,
            high_fat: i,
            high_sugar: j,
            outdoor_games: k,
            sleep_issues: m,
            regular_sleep_pattern: n,
            vegetable_consumption: o,
        }
    }
}

impl From<LabelFields> for TraitLabels {
    fn from(f: LabelFields) -> Self {
        TraitLabels([
            f.religious_practice,
            f.smoking,
            f.religious_beliefs,
            f.physical_exercise,
            f.family_diabetes,
            f.family_heart_disease,
            f.family_brain_stroke,
            f.fast_food,
            f.high_fat,
            f.high_sugar,
            f.outdoor_games,
            f.sleep_issues,
            f.regular_sleep_pattern,
            f.vegetable_consumption,
        ])
    }
}

/// One band-power emission from the headset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BandPowerRow {
    /// Milliseconds since the start of the session or recording.
    pub timestamp_ms: u64,
    /// Magnitudes in [`Band::ALL`] order, each below 2^24.
    pub bands: [u32; NUM_BANDS],
}

impl BandPowerRow {
    pub fn new(timestamp_ms: u64, bands: [u32; NUM_BANDS]) -> Self {
        Self {
            timestamp_ms,
            bands,
        }
    }

    pub fn band(&self, b: Band) -> u32 {
        self.bands[b.index()]
    }
}

/// Contiguous rows recorded for one subject during one emotion phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub subject_id: String,
    pub emotion: Emotion,
    pub rows: Vec<BandPowerRow>,
}

impl Segment {
    pub fn new(subject_id: impl Into<String>, emotion: Emotion, rows: Vec<BandPowerRow>) -> Self {
        Self {
            subject_id: subject_id.into(),
            emotion,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_serialize_with_all_fourteen_names() {
        let mut labels = TraitLabels::default();
        labels.set(Trait::Smoking, true);
        let json = serde_json::to_value(labels).unwrap();
        let obj = json.as_object().unwrap();
        assert_eq!(obj.len(), NUM_TRAITS);
        for t in Trait::ALL {
            assert_eq!(obj[t.name()], serde_json::Value::Bool(t == Trait::Smoking));
        }
        let back: TraitLabels = serde_json::from_value(json).unwrap();
        assert_eq!(back, labels);
    }

    #[test]
    fn labels_reject_missing_trait() {
        let mut json = serde_json::to_value(TraitLabels::default()).unwrap();
        json.as_object_mut().unwrap().remove("fast_food");
        assert!(serde_json::from_value::<TraitLabels>(json).is_err());
    }

    #[test]
    fn names_round_trip() {
        for t in Trait::ALL {
            assert_eq!(t.name().parse::<Trait>().unwrap(), t);
        }
        for e in Emotion::ALL {
            assert_eq!(e.name().parse::<Emotion>().unwrap(), e);
        }
        assert_eq!(Emotion::Meditation.next(), None);
        assert_eq!(Emotion::Happy.next(), Some(Emotion::Sad));
    }
}
