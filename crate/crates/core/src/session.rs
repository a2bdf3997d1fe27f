//! Live evaluation session: four timed emotion phases, prediction of the
//! fourteen traits, then a single round of user ratings.
//!
//! This is a pure state machine; streaming, timing and persistence live in
//! the service crate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classical::{predict_from_segments, ClassicalError, TraitPrediction, TraitSelector};
use crate::types::{BandPowerRow, Emotion, Segment, Trait, NUM_TRAITS};

pub const DEFAULT_PHASE_SECONDS: u32 = 120;
pub const MAX_SATISFACTION: f64 = 5.0;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("phase {0} has no buffered rows")]
    EmptyPhaseBuffer(Emotion),
    #[error("cannot advance from {0}")]
    InvalidTransition(String),
    #[error("expected phase {expected}, session is in {actual}")]
    WrongPhase { expected: String, actual: String },
    #[error("expected {NUM_TRAITS} ratings, got {0}")]
    BadRatingCount(usize),
    #[error("ratings must be 0 or 1, got {0}")]
    InvalidRating(u8),
    #[error("satisfaction must be within [0, 5], got {0}")]
    SatisfactionOutOfRange(f64),
    #[error("no reports to summarize")]
    EmptyInput,
    #[error(transparent)]
    Prediction(#[from] ClassicalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Running { emotion: Emotion, elapsed_ms: u64 },
    Predicting,
    Rating,
    Done,
}

impl Phase {
    /// Short label used in stream messages and errors.
    pub fn label(&self) -> String {
        match self {
            Phase::Idle => "idle".into(),
            Phase::Running { emotion, .. } => emotion.name().into(),
            Phase::Predicting => "predicting".into(),
            Phase::Rating => "rating".into(),
            Phase::Done => "done".into(),
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Simulator,
    Replay,
    ExternalBytes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub prediction: bool,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub session_id: String,
    pub entries: Vec<ReportEntry>,
    /// Ratings of 1 divided by fourteen.
    pub accuracy: f64,
    pub satisfaction: f64,
}

impl EvaluationReport {
    pub fn new(
        session_id: impl Into<String>,
        predictions: &[TraitPrediction],
        ratings: &[u8],
        satisfaction: f64,
    ) -> Result<Self, SessionError> {
        if ratings.len() != NUM_TRAITS {
            return Err(SessionError::BadRatingCount(ratings.len()));
        }
        if let Some(&bad) = ratings.iter().find(|&&r| r > 1) {
            return Err(SessionError::InvalidRating(bad));
        }
        if !(0.0..=MAX_SATISFACTION).contains(&satisfaction) {
            return Err(SessionError::SatisfactionOutOfRange(satisfaction));
        }
        let ones = ratings.iter().filter(|&&r| r == 1).count();
        Ok(Self {
            session_id: session_id.into(),
            entries: predictions
                .iter()
                .zip(ratings)
                .map(|(p, &r)| ReportEntry {
                    trait_: p.trait_,
                    prediction: p.value,
                    rating: r,
                })
                .collect(),
            accuracy: ones as f64 / NUM_TRAITS as f64,
            satisfaction,
        })
    }
}

pub fn mean_satisfaction(reports: &[EvaluationReport]) -> Result<f64, SessionError> {
    if reports.is_empty() {
        return Err(SessionError::EmptyInput);
    }
    Ok(reports.iter().map(|r| r.satisfaction).sum::<f64>() / reports.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRatingSummary {
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub reports: usize,
    pub mean_satisfaction: f64,
    pub mean_accuracy: f64,
    pub per_trait: Vec<TraitRatingSummary>,
}

pub fn summarize(reports: &[EvaluationReport]) -> Result<ReportSummary, SessionError> {
    let mean_sat = mean_satisfaction(reports)?;
    let n = reports.len() as f64;
    let per_trait = Trait::ALL
        .iter()
        .map(|&t| {
            let ones = reports
                .iter()
                .filter(|r| r.entries.iter().any(|e| e.trait_ == t && e.rating == 1))
                .count();
            TraitRatingSummary {
                trait_: t,
                accuracy: ones as f64 / n,
            }
        })
        .collect();
    Ok(ReportSummary {
        reports: reports.len(),
        mean_satisfaction: mean_sat,
        mean_accuracy: reports.iter().map(|r| r.accuracy).sum::<f64>() / n,
        per_trait,
    })
}

/// State of one live session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub source: SourceKind,
    pub phase_duration_s: u32,
    phase: Phase,
    buffers: BTreeMap<Emotion, Vec<BandPowerRow>>,
    predictions: Option<Vec<TraitPrediction>>,
    report: Option<EvaluationReport>,
}

impl Session {
    pub fn new(id: impl Into<String>, source: SourceKind, phase_duration_s: u32) -> Self {
        Self {
            id: id.into(),
            source,
            phase_duration_s,
            phase: Phase::Idle,
            buffers: BTreeMap::new(),
            predictions: None,
            report: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn predictions(&self) -> Option<&[TraitPrediction]> {
        self.predictions.as_deref()
    }

    pub fn report(&self) -> Option<&EvaluationReport> {
        self.report.as_ref()
    }

    pub fn rows(&self, emotion: Emotion) -> &[BandPowerRow] {
        self.buffers.get(&emotion).map_or(&[], Vec::as_slice)
    }

    /// Buffered rows of a phase as a segment.
    pub fn segment(&self, emotion: Emotion) -> Segment {
        Segment {
            subject_id: self.id.clone(),
            emotion,
            rows: self.rows(emotion).to_vec(),
        }
    }

    /// Buffer a row for the running phase. `timestamp_ms` is relative to
    /// the phase start and becomes the phase's elapsed time.
    pub fn push_row(&mut self, row: BandPowerRow) -> Result<(), SessionError> {
        let Phase::Running { emotion, .. } = self.phase else {
            return Err(SessionError::WrongPhase {
                expected: "running".into(),
                actual: self.phase.label(),
            });
        };
        self.phase = Phase::Running {
            emotion,
            elapsed_ms: row.timestamp_ms,
        };
        self.buffers.entry(emotion).or_default().push(row);
        Ok(())
    }

    /// Move to the next phase. Leaving meditation runs prediction with
    /// `selector`, which is only consulted on that transition.
    pub fn advance(&mut self, selector: &TraitSelector) -> Result<Phase, SessionError> {
        let next = match self.phase {
            Phase::Idle => Phase::Running {
                emotion: Emotion::Happy,
                elapsed_ms: 0,
            },
            Phase::Running { emotion, .. } => {
                if self.rows(emotion).is_empty() {
                    return Err(SessionError::EmptyPhaseBuffer(emotion));
                }
                match emotion.next() {
                    Some(e) => Phase::Running {
                        emotion: e,
                        elapsed_ms: 0,
                    },
                    None => {
                        let segments = Emotion::ALL.iter().map(|&e| (e, self.segment(e))).collect();
                        self.predictions = Some(predict_from_segments(selector, &segments)?);
                        Phase::Predicting
                    }
                }
            }
            Phase::Predicting => Phase::Rating,
            Phase::Rating | Phase::Done => {
                return Err(SessionError::InvalidTransition(self.phase.label()))
            }
        };
        self.phase = next;
        Ok(next)
    }

    pub fn submit_ratings(
        &mut self,
        ratings: &[u8],
        satisfaction: f64,
    ) -> Result<&EvaluationReport, SessionError> {
        if self.phase != Phase::Rating {
            return Err(SessionError::WrongPhase {
                expected: "rating".into(),
                actual: self.phase.label(),
            });
        }
        let predictions = self.predictions.as_deref().unwrap_or_default();
        let report = EvaluationReport::new(&self.id, predictions, ratings, satisfaction)?;
        self.phase = Phase::Done;
        Ok(self.report.insert(report))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::classical::{
        select_per_trait, FittedModel, ModelParameters, ModelSpec, TrainedModel,
    };
    use crate::features::FeatureOptions;
    use proptest::prelude::*;

    pub(crate) fn constant_selector(p: f64) -> TraitSelector {
        let models: Vec<TrainedModel> = Trait::ALL
            .iter()
            .flat_map(|&t| {
                Emotion::ALL.map(|e| TrainedModel {
                    spec: ModelSpec::GaussianNaiveBayes,
                    parameters: ModelParameters {
                        features: FeatureOptions::default(),
                        standardizer: None,
                        model: FittedModel::Constant { probability: p },
                    },
                    trait_: t,
                    emotion: e,
                    training_accuracy: 1.0,
                    cv_accuracy: 1.0,
                })
            })
            .collect();
        select_per_trait(&models).unwrap()
    }

    fn row(t: u64) -> BandPowerRow {
        BandPowerRow {
            timestamp_ms: t,
            bands: [100, 200, 300, 400, 500, 600, 700, 800],
        }
    }

    fn run_to_rating(s: &mut Session, sel: &TraitSelector) {
        s.advance(sel).unwrap();
        for _ in 0..4 {
            s.push_row(row(0)).unwrap();
            s.push_row(row(1000)).unwrap();
            s.advance(sel).unwrap();
        }
        assert_eq!(s.advance(sel).unwrap(), Phase::Rating);
    }

    #[test]
    fn full_flow() {
        let sel = constant_selector(0.9);
        let mut s = Session::new("a", SourceKind::Simulator, 5);
        assert_eq!(s.phase(), Phase::Idle);
        assert!(s.predictions().is_none());
        s.advance(&sel).unwrap();
        assert!(matches!(
            s.advance(&sel),
            Err(SessionError::EmptyPhaseBuffer(Emotion::Happy))
        ));
        s.push_row(row(0)).unwrap();
        s.push_row(row(1000)).unwrap();
        assert_eq!(
            s.phase(),
            Phase::Running {
                emotion: Emotion::Happy,
                elapsed_ms: 1000
            }
        );
        for e in [Emotion::Sad, Emotion::Neutral, Emotion::Meditation] {
            assert_eq!(s.advance(&sel).unwrap().label(), e.name());
            s.push_row(row(0)).unwrap();
        }
        assert_eq!(s.advance(&sel).unwrap(), Phase::Predicting);
        assert_eq!(s.predictions().unwrap().len(), 14);
        assert!(s.predictions().unwrap().iter().all(|p| p.value));
        assert_eq!(s.advance(&sel).unwrap(), Phase::Rating);
        assert!(matches!(
            s.advance(&sel),
            Err(SessionError::InvalidTransition(_))
        ));

        let mut ratings = [0u8; 14];
        ratings[..7].fill(1);
        let report = s.submit_ratings(&ratings, 4.5).unwrap();
        assert_eq!(report.accuracy, 0.5);
        assert_eq!(s.phase(), Phase::Done);
        assert!(matches!(
            s.advance(&sel),
            Err(SessionError::InvalidTransition(_))
        ));
        assert!(matches!(
            s.submit_ratings(&ratings, 4.0),
            Err(SessionError::WrongPhase { .. })
        ));
    }

    #[test]
    fn rating_validation() {
        let sel = constant_selector(0.2);
        let mut s = Session::new("b", SourceKind::Replay, 5);
        assert!(matches!(
            s.submit_ratings(&[1; 14], 3.0),
            Err(SessionError::WrongPhase { .. })
        ));
        run_to_rating(&mut s, &sel);
        assert!(matches!(
            s.submit_ratings(&[1; 13], 3.0),
            Err(SessionError::BadRatingCount(13))
        ));
        assert!(matches!(
            s.submit_ratings(&[2; 14], 3.0),
            Err(SessionError::InvalidRating(2))
        ));
        assert!(matches!(
            s.submit_ratings(&[1; 14], 5.5),
            Err(SessionError::SatisfactionOutOfRange(_))
        ));
        assert!(matches!(
            s.submit_ratings(&[1; 14], f64::NAN),
            Err(SessionError::SatisfactionOutOfRange(_))
        ));
        assert_eq!(s.phase(), Phase::Rating);
        assert_eq!(s.submit_ratings(&[1; 14], 5.0).unwrap().accuracy, 1.0);
    }

    #[test]
    fn push_outside_running_rejected() {
        let mut s = Session::new("c", SourceKind::ExternalBytes, 5);
        assert!(matches!(
            s.push_row(row(0)),
            Err(SessionError::WrongPhase { .. })
        ));
    }

    #[test]
    fn satisfaction_means() {
        let report = |s: f64| EvaluationReport {
            session_id: String::new(),
            entries: Vec::new(),
            accuracy: 0.0,
            satisfaction: s,
        };
        assert!(matches!(
            mean_satisfaction(&[]),
            Err(SessionError::EmptyInput)
        ));
        assert_eq!(mean_satisfaction(&[report(5.0)]).unwrap(), 5.0);
        assert_eq!(mean_satisfaction(&vec![report(3.5); 7]).unwrap(), 3.5);
    }

    #[test]
    fn session_json_round_trip() {
        let sel = constant_selector(0.7);
        let mut s = Session::new("d", SourceKind::Simulator, 5);
        run_to_rating(&mut s, &sel);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains(r#""phase":{"state":"rating"}"#));
        let back: Session = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[derive(Debug, Clone)]
    enum Command {
        Advance,
        Push,
        Rate,
    }

    proptest! {
        #[test]
        fn phases_follow_the_declared_order(
            cmds in prop::collection::vec(
                prop_oneof![Just(Command::Advance), Just(Command::Push), Just(Command::Rate)],
                0..40,
            )
        ) {
            let order = ["idle", "happy", "sad", "neutral", "meditation", "predicting", "rating", "done"];
            let sel = constant_selector(0.6);
            let mut s = Session::new("p", SourceKind::Simulator, 5);
            let mut pos = 0;
            let mut has_row = false;
            for cmd in cmds {
                let before = s.phase();
                let ok = match cmd {
                    Command::Advance => s.advance(&sel).is_ok(),
                    Command::Push => s.push_row(row(0)).is_ok(),
                    Command::Rate => s.submit_ratings(&[1; 14], 4.0).is_ok(),
                };
                let label = s.phase().label();
                let expected_ok = match cmd {
                    Command::Advance => (pos == 0) || ((1..=4).contains(&pos) && has_row) || pos == 5,
                    Command::Push => (1..=4).contains(&pos),
                    Command::Rate => pos == 6,
                };
                prop_assert_eq!(ok, expected_ok, "{:?} from {}", cmd, before);
                match cmd {
                    Command::Push if ok => has_row = true,
                    Command::Advance | Command::Rate if ok => {
                        pos += 1;
                        has_row = false;
                    }
                    _ => {}
                }
                prop_assert_eq!(label.as_str(), order[pos]);
                prop_assert_eq!(s.predictions().is_some(), pos >= 5);
                prop_assert_eq!(s.report().is_some(), pos == 7);
            }
        }
    }
}
