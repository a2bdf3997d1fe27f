use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{model_search, ClassicalError, FittedModel, ModelSpec, Result, SearchConfig};
use crate::dataset::{SessionRecord, Split};
use crate::features::{
    extract_features_with, record_features, FeatureOptions, FeatureVector, Standardizer,
};
use crate::seed;
use crate::types::{Emotion, Segment, Trait, NUM_TRAITS};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

/// Everything needed to turn a [`FeatureVector`] into a probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub features: FeatureOptions,
    pub standardizer: Option<Standardizer>,
    pub model: FittedModel,
}

/// A searched and refitted classifier for one (trait, emotion) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub parameters: ModelParameters,
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub emotion: Emotion,
    pub training_accuracy: f64,
    pub cv_accuracy: f64,
}

impl TrainedModel {
    pub fn predict_proba(&self, fv: &FeatureVector) -> f64 {
        match &self.parameters.standardizer {
            Some(s) => self
                .parameters
                .model
                .predict_proba(&s.transform(&fv.values)),
            None => self.parameters.model.predict_proba(&fv.values),
        }
    }

    pub fn predict(&self, fv: &FeatureVector) -> bool {
        self.predict_proba(fv) >= 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub search: SearchConfig,
    pub features: FeatureOptions,
    /// Z-score features with training statistics before the search.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            search: SearchConfig::default(),
            features: FeatureOptions::default(),
            standardize: false,
            seed: 7,
        }
    }
}

/// Search and fit one model per (trait, emotion) on the train side of
/// `split`, in trait-major, emotion-minor order.
///
/// Test-side records are never read. Cell `(t, e)` searches with seed
/// `derive(config.seed, [t, e])`, so cells may run in any order.
pub fn train_grid(
    records: &[SessionRecord],
    split: &Split,
    config: &GridConfig,
) -> Result<Vec<TrainedModel>> {
    let train = split.train_records(records);
    if train.is_empty() {
        return Err(ClassicalError::TooFewSamples { needed: 1, got: 0 });
    }
    for t in Trait::ALL {
        let pos = train.iter().filter(|r| r.labels.get(t)).count();
        if pos == 0 || pos == train.len() {
            return Err(ClassicalError::DegenerateTrait(t));
        }
    }

    let features: Vec<BTreeMap<Emotion, FeatureVector>> = train
        .iter()
        .map(|r| record_features(r, config.features))
        .collect::<std::result::Result<_, _>>()?;

    let mut per_emotion = BTreeMap::new();
    for e in Emotion::ALL {
        let raw: Vec<Vec<f64>> = features.iter().map(|f| f[&e].values.to_vec()).collect();
        let standardizer = if config.standardize {
            Some(Standardizer::fit(&raw)?)
        } else {
            None
        };
        let x = match &standardizer {
            Some(s) => raw.iter().map(|r| s.transform(r)).collect(),
            None => raw,
        };
        per_emotion.insert(e, (x, standardizer));
    }

    let cells: Vec<(Trait, Emotion)> = Trait::ALL
        .iter()
        .flat_map(|&t| Emotion::ALL.iter().map(move |&e| (t, e)))
        .collect();
    cells
        .par_iter()
        .map(|&(t, e)| {
            let (x, standardizer) = &per_emotion[&e];
            let y: Vec<bool> = train.iter().map(|r| r.labels.get(t)).collect();
            let cell_seed = seed::derive(config.seed, &[t.index() as u64, e.index() as u64]);
            let found = model_search(x, &y, &config.search, cell_seed)?;
            log::debug!(
                "{t}/{e}: {} cv={:.3} train={:.3}",
                found.spec.family(),
                found.cv_accuracy,
                found.training_accuracy
            );
            Ok(TrainedModel {
                spec: found.spec,
                parameters: ModelParameters {
                    features: config.features,
                    standardizer: standardizer.clone(),
                    model: found.model,
                },
                trait_: t,
                emotion: e,
                training_accuracy: found.training_accuracy,
                cv_accuracy: found.cv_accuracy,
            })
        })
        .collect()
}

/// One chosen model per trait, in [`Trait::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraitSelector {
    entries: Vec<TrainedModel>,
}

impl TraitSelector {
    pub fn new(entries: Vec<TrainedModel>) -> Result<Self> {
        if entries.len() != NUM_TRAITS {
            return Err(ClassicalError::SelectorLoad(format!(
                "expected {NUM_TRAITS} entries, found {}",
                entries.len()
            )));
        }
        for (entry, t) in entries.iter().zip(Trait::ALL) {
            if entry.trait_ != t {
                return Err(ClassicalError::SelectorLoad(format!(
                    "expected an entry for {t}, found {}",
                    entry.trait_
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TrainedModel] {
        &self.entries
    }

    pub fn get(&self, t: Trait) -> &TrainedModel {
        &self.entries[t.index()]
    }
}

/// For each trait, the emotion model with the highest training accuracy;
/// ties go to the earlier emotion (happy, sad, neutral, meditation).
pub fn select_per_trait(models: &[TrainedModel]) -> Result<TraitSelector> {
    let mut entries = Vec::with_capacity(NUM_TRAITS);
    for t in Trait::ALL {
        let mut best: Option<&TrainedModel> = None;
        for e in Emotion::ALL {
            let m = models
                .iter()
                .find(|m| m.trait_ == t && m.emotion == e)
                .ok_or(ClassicalError::MissingEmotion {
                    trait_: t,
                    emotion: e,
                })?;
            if best.is_none_or(|b| m.training_accuracy > b.training_accuracy) {
                best = Some(m);
            }
        }
        entries.push(best.expect("four emotions checked").clone());
    }
    TraitSelector::new(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitPrediction {
    #[serde(rename = "trait")]
    pub trait_: Trait,
    /// Emotion whose model produced the prediction; `None` for fused votes.
    pub emotion: Option<Emotion>,
    pub value: bool,
    pub probability: f64,
}

fn features_for(features: &BTreeMap<Emotion, FeatureVector>, e: Emotion) -> Result<&FeatureVector> {
    features
        .get(&e)
        .ok_or(ClassicalError::MissingEmotionFeatures(e))
}

/// Predict all fourteen traits, each with its selected emotion's model.
pub fn predict_traits(
    selector: &TraitSelector,
    features: &BTreeMap<Emotion, FeatureVector>,
) -> Result<Vec<TraitPrediction>> {
    selector
        .entries()
        .iter()
        .map(|m| {
            let p = m.predict_proba(features_for(features, m.emotion)?);
            Ok(TraitPrediction {
                trait_: m.trait_,
                emotion: Some(m.emotion),
                value: p >= 0.5,
                probability: p,
            })
        })
        .collect()
}

/// Predict all fourteen traits straight from raw segments, extracting
/// features with each selected model's own options.
pub fn predict_from_segments(
    selector: &TraitSelector,
    segments: &BTreeMap<Emotion, Segment>,
) -> Result<Vec<TraitPrediction>> {
    let mut cache: BTreeMap<(Emotion, bool), FeatureVector> = BTreeMap::new();
    selector
        .entries()
        .iter()
        .map(|m| {
            let opts = m.parameters.features;
            let key = (m.emotion, opts.relative);
            let fv = match cache.entry(key) {
                Entry::Occupied(o) => o.into_mut(),
                Entry::Vacant(v) => {
                    let segment = segments
                        .get(&m.emotion)
                        .ok_or(ClassicalError::MissingEmotionFeatures(m.emotion))?;
                    v.insert(extract_features_with(segment, opts)?)
                }
            };
            let p = m.predict_proba(fv);
            Ok(TraitPrediction {
                trait_: m.trait_,
                emotion: Some(m.emotion),
                value: p >= 0.5,
                probability: p,
            })
        })
        .collect()
}

/// Alternative fusion: majority vote of the four emotion models per trait,
/// with a 2-2 split broken by mean probability.
pub fn predict_traits_vote(
    models: &[TrainedModel],
    features: &BTreeMap<Emotion, FeatureVector>,
) -> Result<Vec<TraitPrediction>> {
    Trait::ALL
        .iter()
        .map(|&t| {
            let mut votes = 0;
            let mut sum_p = 0.0;
            for e in Emotion::ALL {
                let m = models
                    .iter()
                    .find(|m| m.trait_ == t && m.emotion == e)
                    .ok_or(ClassicalError::MissingEmotion {
                        trait_: t,
                        emotion: e,
                    })?;
                let p = m.predict_proba(features_for(features, e)?);
                votes += (p >= 0.5) as usize;
                sum_p += p;
            }
            let mean_p = sum_p / 4.0;
            Ok(TraitPrediction {
                trait_: t,
                emotion: None,
                value: votes > 2 || (votes == 2 && mean_p >= 0.5),
                probability: mean_p,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitAccuracy {
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub emotion: Emotion,
    pub family: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Per-trait accuracy of the selector on held-out records.
pub fn evaluate_selector(
    selector: &TraitSelector,
    records: &[&SessionRecord],
) -> Result<Vec<TraitAccuracy>> {
    let opts_per_trait: Vec<FeatureOptions> = selector
        .entries()
        .iter()
        .map(|m| m.parameters.features)
        .collect();
    let mut cache: BTreeMap<(usize, bool), BTreeMap<Emotion, FeatureVector>> = BTreeMap::new();
    let mut correct = [0usize; NUM_TRAITS];
    for (ri, r) in records.iter().enumerate() {
        for (ti, m) in selector.entries().iter().enumerate() {
            let opts = opts_per_trait[ti];
            let key = (ri, opts.relative);
            let features = match cache.entry(key) {
                Entry::Occupied(o) => o.into_mut(),
                Entry::Vacant(v) => v.insert(record_features(r, opts)?),
            };
            let fv = features_for(features, m.emotion)?;
            if m.predict(fv) == r.labels.get(m.trait_) {
                correct[ti] += 1;
            }
        }
        cache.retain(|(i, _), _| *i == ri);
    }
    Ok(selector
        .entries()
        .iter()
        .zip(correct)
        .map(|(m, c)| TraitAccuracy {
            trait_: m.trait_,
            emotion: m.emotion,
            family: m.spec.family().to_string(),
            correct: c,
            total: records.len(),
            accuracy: if records.is_empty() {
                0.0
            } else {
                c as f64 / records.len() as f64
            },
        })
        .collect())
}

/// `trait,emotion,family,cv_accuracy,training_accuracy`, one line per model.
pub fn accuracy_grid_csv(models: &[TrainedModel]) -> String {
    let mut out = String::from("trait,emotion,family,cv_accuracy,training_accuracy\n");
    for m in models {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            m.trait_,
            m.emotion,
            m.spec.family(),
            m.cv_accuracy,
            m.training_accuracy
        ));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct BundleEnvelope {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ClassicalError + '_ {
    move |source| ClassicalError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> ClassicalError + '_ {
    move |source| ClassicalError::Json {
        path: path.to_path_buf(),
        source,
    }
}

pub fn bundle_file_name(t: Trait, e: Emotion) -> String {
    format!("{t}__{e}.json")
}

pub fn save_bundle(model: &TrainedModel, path: &Path) -> Result<()> {
    let envelope = BundleEnvelope {
        format_version: BUNDLE_FORMAT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&envelope).map_err(json_err(path))?;
    fs::write(path, json + "\n").map_err(io_err(path))
}

pub fn load_bundle(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let envelope: BundleEnvelope = serde_json::from_str(&text).map_err(json_err(path))?;
    if envelope.format_version != BUNDLE_FORMAT_VERSION {
        return Err(ClassicalError::SelectorLoad(format!(
            "{}: unsupported bundle format {}",
            path.display(),
            envelope.format_version
        )));
    }
    Ok(envelope.model)
}

/// Write one bundle per model into `dir`.
pub fn save_models(models: &[TrainedModel], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    models
        .iter()
        .map(|m| {
            let path = dir.join(bundle_file_name(m.trait_, m.emotion));
            save_bundle(m, &path)?;
            Ok(path)
        })
        .collect()
}

/// Load every (trait, emotion) bundle from `dir` in canonical order.
pub fn load_models(dir: &Path) -> Result<Vec<TrainedModel>> {
    let mut out = Vec::new();
    for t in Trait::ALL {
        for e in Emotion::ALL {
            let path = dir.join(bundle_file_name(t, e));
            if path.exists() {
                out.push(load_bundle(&path)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorEntry {
    #[serde(rename = "trait")]
    pub trait_: Trait,
    pub emotion: Emotion,
    /// Bundle path, relative to the selector file's directory.
    pub bundle: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct SelectorFile {
    format_version: u32,
    entries: Vec<SelectorEntry>,
}

/// Write the selector file plus one bundle per entry under `bundle_dir`.
pub fn save_selector(selector: &TraitSelector, path: &Path, bundle_dir: &Path) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(bundle_dir).map_err(io_err(bundle_dir))?;
    let mut entries = Vec::with_capacity(NUM_TRAITS);
    for m in selector.entries() {
        let bundle_path = bundle_dir.join(bundle_file_name(m.trait_, m.emotion));
        save_bundle(m, &bundle_path)?;
        let rel = bundle_path
            .strip_prefix(base)
            .map(Path::to_path_buf)
            .unwrap_or(bundle_path);
        entries.push(SelectorEntry {
            trait_: m.trait_,
            emotion: m.emotion,
            bundle: rel,
        });
    }
    let file = SelectorFile {
        format_version: BUNDLE_FORMAT_VERSION,
        entries,
    };
    let json = serde_json::to_string_pretty(&file).map_err(json_err(path))?;
    fs::write(path, json + "\n").map_err(io_err(path))
}

/// Load a selector; it must reference exactly one bundle per trait.
pub fn load_selector(path: &Path) -> Result<TraitSelector> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let file: SelectorFile = serde_json::from_str(&text).map_err(json_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut by_trait: BTreeMap<Trait, TrainedModel> = BTreeMap::new();
    for entry in &file.entries {
        let model = load_bundle(&base.join(&entry.bundle))?;
        if model.trait_ != entry.trait_ || model.emotion != entry.emotion {
            return Err(ClassicalError::SelectorLoad(format!(
                "bundle {} holds {}/{}, selector expects {}/{}",
                entry.bundle.display(),
                model.trait_,
                model.emotion,
                entry.trait_,
                entry.emotion
            )));
        }
        if by_trait.insert(entry.trait_, model).is_some() {
            return Err(ClassicalError::SelectorLoad(format!(
                "trait {} listed twice",
                entry.trait_
            )));
        }
    }
    if by_trait.len() != NUM_TRAITS {
        return Err(ClassicalError::SelectorLoad(format!(
            "expected {NUM_TRAITS} traits, found {}",
            by_trait.len()
        )));
    }
    TraitSelector::new(by_trait.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_model(t: Trait, e: Emotion, p: f64, training_accuracy: f64) -> TrainedModel {
        TrainedModel {
            spec: ModelSpec::GaussianNaiveBayes,
            parameters: ModelParameters {
                features: FeatureOptions::default(),
                standardizer: None,
                model: FittedModel::Constant { probability: p },
            },
            trait_: t,
            emotion: e,
            training_accuracy,
            cv_accuracy: 0.5,
        }
    }

    fn grid_with(acc: impl Fn(Trait, Emotion) -> f64) -> Vec<TrainedModel> {
        Trait::ALL
            .iter()
            .flat_map(|&t| Emotion::ALL.map(|e| constant_model(t, e, 1.0, acc(t, e))))
            .collect()
    }

    fn features() -> BTreeMap<Emotion, FeatureVector> {
        Emotion::ALL
            .iter()
            .map(|&e| {
                (
                    e,
                    FeatureVector {
                        subject_id: "X".into(),
                        emotion: e,
                        values: [1.0; 16],
                    },
                )
            })
            .collect()
    }

    #[test]
    fn selects_highest_training_accuracy() {
        let table = [0.92, 0.85, 0.70, 0.88];
        let models = grid_with(|_, e| table[e.index()]);
        let sel = select_per_trait(&models).unwrap();
        assert!(sel.entries().iter().all(|m| m.emotion == Emotion::Happy));

        let table = [0.70, 0.85, 0.92, 0.88];
        let models = grid_with(|_, e| table[e.index()]);
        let sel = select_per_trait(&models).unwrap();
        assert!(sel.entries().iter().all(|m| m.emotion == Emotion::Neutral));
    }

    #[test]
    fn equal_accuracies_pick_happy() {
        let sel = select_per_trait(&grid_with(|_, _| 0.8)).unwrap();
        assert!(sel.entries().iter().all(|m| m.emotion == Emotion::Happy));
    }

    #[test]
    fn missing_emotion_reported() {
        let mut models = grid_with(|_, _| 0.8);
        models.retain(|m| !(m.trait_ == Trait::HighFat && m.emotion == Emotion::Sad));
        assert!(matches!(
            select_per_trait(&models),
            Err(ClassicalError::MissingEmotion {
                trait_: Trait::HighFat,
                emotion: Emotion::Sad
            })
        ));
    }

    #[test]
    fn constant_true_model_always_predicts_true() {
        let sel = select_per_trait(&grid_with(|_, _| 0.8)).unwrap();
        let preds = predict_traits(&sel, &features()).unwrap();
        assert_eq!(preds.len(), 14);
        let smoking = preds.iter().find(|p| p.trait_ == Trait::Smoking).unwrap();
        assert!(smoking.value);
        assert_eq!(smoking.probability, 1.0);
    }

    #[test]
    fn prediction_needs_the_selected_emotion() {
        let table = [0.1, 0.1, 0.1, 0.9];
        let sel = select_per_trait(&grid_with(|_, e| table[e.index()])).unwrap();
        let mut f = features();
        f.remove(&Emotion::Meditation);
        assert!(matches!(
            predict_traits(&sel, &f),
            Err(ClassicalError::MissingEmotionFeatures(Emotion::Meditation))
        ));
    }

    #[test]
    fn vote_fusion_breaks_ties_by_mean_probability() {
        let mut models = grid_with(|_, _| 0.8);
        for m in &mut models {
            let p = match m.emotion {
                Emotion::Happy | Emotion::Sad => 0.6,
                _ => 0.3,
            };
            m.parameters.model = FittedModel::Constant { probability: p };
        }
        let preds = predict_traits_vote(&models, &features()).unwrap();
        assert!(preds.iter().all(|p| !p.value && p.emotion.is_none()));
        assert!((preds[0].probability - 0.45).abs() < 1e-12);
    }

    #[test]
    fn selector_file_round_trip() {
        let sel = select_per_trait(&grid_with(|t, e| {
            (t.index() * 4 + e.index()) as f64 / 100.0
        }))
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("selector.json");
        save_selector(&sel, &path, &dir.path().join("selected")).unwrap();
        let back = load_selector(&path).unwrap();
        assert_eq!(back, sel);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("selected/smoking__meditation.json"));
    }

    #[test]
    fn selector_with_thirteen_entries_rejected() {
        let sel = select_per_trait(&grid_with(|_, _| 0.5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("selector.json");
        save_selector(&sel, &path, dir.path()).unwrap();
        let mut file: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        file["entries"].as_array_mut().unwrap().pop();
        fs::write(&path, file.to_string()).unwrap();
        assert!(matches!(
            load_selector(&path),
            Err(ClassicalError::SelectorLoad(_))
        ));
    }

    #[test]
    fn bundle_envelope_fields() {
        let m = constant_model(Trait::Smoking, Emotion::Sad, 0.25, 0.75);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        save_bundle(&m, &path).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        for key in [
            "format_version",
            "spec",
            "parameters",
            "trait",
            "emotion",
            "training_accuracy",
            "cv_accuracy",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(load_bundle(&path).unwrap(), m);
    }

    #[test]
    fn accuracy_grid_has_one_line_per_model() {
        let csv = accuracy_grid_csv(&grid_with(|_, _| 0.5));
        assert_eq!(csv.lines().count(), 57);
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("religious_practice,happy,"));
    }

    fn selected_emotions(acc: &[[f64; 4]; NUM_TRAITS]) -> Vec<Emotion> {
        let models = grid_with(|t, e| acc[t.index()][e.index()]);
        let sel = select_per_trait(&models).unwrap();
        sel.entries().iter().map(|m| m.emotion).collect()
    }

    proptest::proptest! {
        #[test]
        fn selection_is_argmax_and_rank_invariant(
            steps in proptest::array::uniform14(proptest::array::uniform4(0u8..=16)),
        ) {
            // Sixteenths make ties common.
            let acc = steps.map(|row| row.map(|k| f64::from(k) / 16.0));
            let chosen = selected_emotions(&acc);
            for (t, row) in acc.iter().enumerate() {
                let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let first = row.iter().position(|&a| a == best).unwrap();
                proptest::prop_assert_eq!(chosen[t], Emotion::ALL[first]);
            }
            let cubed = acc.map(|row| row.map(|a| a.powi(3) - 2.0));
            let logged = acc.map(|row| row.map(|a| (0.1 + a).ln()));
            proptest::prop_assert_eq!(&selected_emotions(&cubed), &chosen);
            proptest::prop_assert_eq!(&selected_emotions(&logged), &chosen);
        }
    }
}
