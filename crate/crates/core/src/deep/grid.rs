use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{ModelKind, Network, NUM_CLASSES};
use super::train::{train, EpochStats, TrainConfig};
use super::DeepError;
use crate::dataset::{SessionRecord, Split};
use crate::seed;
use crate::types::{Emotion, Segment, Trait, NUM_BANDS};

pub const DEEP_BUNDLE_FORMAT_VERSION: u32 = 1;

/// Per-band z-scoring of band-power rows, optionally after `ln(1 + v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceStandardizer {
    pub log_transform: bool,
    pub mean: [f64; NUM_BANDS],
    pub std: [f64; NUM_BANDS],
}

impl SequenceStandardizer {
    fn raw(&self, v: u32) -> f64 {
        if self.log_transform {
            (v as f64).ln_1p()
        } else {
            v as f64
        }
    }

    /// Fit on every row of `segments`; constant bands get unit scale.
    pub fn fit(segments: &[&Segment], log_transform: bool) -> Result<Self, DeepError> {
        let mut s = Self {
            log_transform,
            mean: [0.0; NUM_BANDS],
            std: [1.0; NUM_BANDS],
        };
        let n: usize = segments.iter().map(|seg| seg.rows.len()).sum();
        if n == 0 {
            return Err(DeepError::EmptyInput);
        }
        let mut sum = [0.0; NUM_BANDS];
        for row in segments.iter().flat_map(|seg| &seg.rows) {
            for b in 0..NUM_BANDS {
                sum[b] += s.raw(row.bands[b]);
            }
        }
        let mean = sum.map(|v| v / n as f64);
        let mut ss = [0.0; NUM_BANDS];
        for row in segments.iter().flat_map(|seg| &seg.rows) {
            for b in 0..NUM_BANDS {
                ss[b] += (s.raw(row.bands[b]) - mean[b]).powi(2);
            }
        }
        s.mean = mean;
        for b in 0..NUM_BANDS {
            let sd = (ss[b] / n as f64).sqrt();
            s.std[b] = if sd > 0.0 { sd } else { 1.0 };
        }
        Ok(s)
    }

    pub fn transform(&self, segment: &Segment) -> Vec<Vec<f64>> {
        segment
            .rows
            .iter()
            .map(|row| {
                (0..NUM_BANDS)
                    .map(|b| (self.raw(row.bands[b]) - self.mean[b]) / self.std[b])
                    .collect()
            })
            .collect()
    }
}

/// A trained recurrent classifier for one (trait, emotion) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepModel {
    pub kind: ModelKind,
    pub trait_: Trait,
    pub emotion: Emotion,
    pub network: Network,
    pub standardizer: SequenceStandardizer,
    pub config: TrainConfig,
    pub final_loss: f64,
    pub training_accuracy: f64,
    pub curve: Vec<EpochStats>,
}

impl DeepModel {
    /// Probability that the trait is present.
    pub fn predict_proba(&self, segment: &Segment) -> Result<f64, DeepError> {
        Ok(self
            .network
            .predict_proba(&self.standardizer.transform(segment))?[1])
    }

    /// Fraction of `records` whose label the model predicts correctly.
    pub fn accuracy(&self, records: &[&SessionRecord]) -> Result<f64, DeepError> {
        let mut correct = 0;
        for r in records {
            let p = self.predict_proba(r.segment(self.emotion))?;
            if (p >= 0.5) == r.labels.get(self.trait_) {
                correct += 1;
            }
        }
        Ok(correct as f64 / records.len().max(1) as f64)
    }
}

/// Train one network per (kind, trait, emotion) on the train side of
/// `split`. Cell seeds are `derive(config.seed, [kind, trait, emotion])`.
pub fn train_deep_grid(
    records: &[SessionRecord],
    split: &Split,
    kinds: &[ModelKind],
    config: &TrainConfig,
    log_transform: bool,
) -> Result<Vec<DeepModel>, DeepError> {
    config.validate()?;
    let train_records = split.train_records(records);
    if train_records.is_empty() {
        return Err(DeepError::EmptyInput);
    }
    let mut inputs = BTreeMap::new();
    for e in Emotion::ALL {
        let segments: Vec<&Segment> = train_records.iter().map(|r| r.segment(e)).collect();
        let standardizer = SequenceStandardizer::fit(&segments, log_transform)?;
        let sequences: Vec<Vec<Vec<f64>>> =
            segments.iter().map(|s| standardizer.transform(s)).collect();
        inputs.insert(e, (standardizer, sequences));
    }

    let mut cells = Vec::new();
    for &k in kinds {
        for t in Trait::ALL {
            for e in Emotion::ALL {
                cells.push((k, t, e));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(kind, t, e)| {
            let (standardizer, sequences) = &inputs[&e];
            let labels: Vec<bool> = train_records.iter().map(|r| r.labels.get(t)).collect();
            let cell_config = TrainConfig {
                seed: seed::derive(
                    config.seed,
                    &[kind.index() as u64, t.index() as u64, e.index() as u64],
                ),
                ..config.clone()
            };
            let outcome = train(kind, sequences, &labels, &cell_config)?;
            let last = outcome.curve.last().expect("at least one epoch");
            log::info!(
                "{kind} {t}/{e}: loss {:.4} train accuracy {:.3}",
                last.loss,
                last.train_accuracy
            );
            Ok(DeepModel {
                kind,
                trait_: t,
                emotion: e,
                final_loss: last.loss,
                training_accuracy: last.train_accuracy,
                network: outcome.network,
                standardizer: standardizer.clone(),
                config: cell_config,
                curve: outcome.curve,
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Shapes {
    input_dim: usize,
    hidden: usize,
    num_classes: usize,
}

#[derive(Serialize, Deserialize)]
struct Metrics {
    final_loss: f64,
    training_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct DeepBundle {
    format_version: u32,
    kind: ModelKind,
    shapes: Shapes,
    #[serde(rename = "trait")]
    trait_: Trait,
    emotion: Emotion,
    parameters: Network,
    standardizer: SequenceStandardizer,
    config: TrainConfig,
    metrics: Metrics,
}

pub fn deep_bundle_stem(kind: ModelKind, t: Trait, e: Emotion) -> String {
    format!("{kind}__{t}__{e}")
}

/// Write `<stem>.json` and the loss curve `<stem>.loss.csv` into `dir`.
pub fn save_deep_model(model: &DeepModel, dir: &Path) -> Result<(), DeepError> {
    fs::create_dir_all(dir)?;
    let stem = deep_bundle_stem(model.kind, model.trait_, model.emotion);
    let bundle = DeepBundle {
        format_version: DEEP_BUNDLE_FORMAT_VERSION,
        kind: model.kind,
        shapes: Shapes {
            input_dim: model.network.input_dim(),
            hidden: model.network.hidden(),
            num_classes: NUM_CLASSES,
        },
        trait_: model.trait_,
        emotion: model.emotion,
        parameters: model.network.clone(),
        standardizer: model.standardizer.clone(),
        config: model.config.clone(),
        metrics: Metrics {
            final_loss: model.final_loss,
            training_accuracy: model.training_accuracy,
        },
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string(&bundle)? + "\n",
    )?;
    fs::write(
        dir.join(format!("{stem}.loss.csv")),
        super::loss_curve_csv(&model.curve),
    )?;
    Ok(())
}

/// Load a bundle written by [`save_deep_model`]; the loss curve is not read.
pub fn load_deep_model(path: &Path) -> Result<DeepModel, DeepError> {
    let bundle: DeepBundle = serde_json::from_str(&fs::read_to_string(path)?)?;
    if bundle.format_version != DEEP_BUNDLE_FORMAT_VERSION {
        return Err(DeepError::Bundle(format!(
            "unsupported format version {}",
            bundle.format_version
        )));
    }
    let net = bundle.parameters;
    net.validate()?;
    if net.kind != bundle.kind
        || net.input_dim() != bundle.shapes.input_dim
        || net.hidden() != bundle.shapes.hidden
        || bundle.shapes.num_classes != NUM_CLASSES
    {
        return Err(DeepError::Bundle(
            "declared shapes do not match parameters".into(),
        ));
    }
    Ok(DeepModel {
        kind: bundle.kind,
        trait_: bundle.trait_,
        emotion: bundle.emotion,
        network: net,
        standardizer: bundle.standardizer,
        config: bundle.config,
        final_loss: bundle.metrics.final_loss,
        training_accuracy: bundle.metrics.training_accuracy,
        curve: Vec::new(),
    })
}
