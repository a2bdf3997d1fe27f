//! Classical classifier portfolio with cross-validated model search.
//!
//! Five families are searched over a small fixed grid per (trait, emotion)
//! cell. The winner by cross-validated accuracy is refitted on the whole
//! training side; per trait, the emotion whose refitted model has the
//! highest training accuracy is then used for prediction.

mod forest;
mod knn;
mod logistic;
mod naive_bayes;
mod pipeline;
mod search;
mod tree;

use serde::{Deserialize, Serialize};

pub use forest::ForestModel;
pub use knn::KnnModel;
pub use logistic::LogisticModel;
pub use naive_bayes::GaussianNbModel;
pub use pipeline::{
    accuracy_grid_csv, bundle_file_name, evaluate_selector, load_bundle, load_models,
    load_selector, predict_from_segments, predict_traits, predict_traits_vote, save_bundle,
    save_models, save_selector, select_per_trait, train_grid, GridConfig, ModelParameters,
    SelectorEntry, TrainedModel, TraitAccuracy, TraitPrediction, TraitSelector,
    BUNDLE_FORMAT_VERSION,
};
pub use search::{
    cross_validate, model_search, stratified_folds, Budget, SearchConfig, SearchResult,
};
pub use tree::{TreeModel, TreeParams};

use crate::types::{Emotion, Trait};

#[derive(Debug, thiserror::Error)]
pub enum ClassicalError {
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("trait {0} has a single class in the training data")]
    DegenerateTrait(Trait),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("feature matrix is empty")]
    EmptyInput,
    #[error("{rows} feature rows but {labels} labels")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature matrix contains non-finite values")]
    NonFinite,
    #[error("no candidate models to search")]
    EmptySearchSpace,
    #[error("trait {trait_}: no model for emotion {emotion}")]
    MissingEmotion { trait_: Trait, emotion: Emotion },
    #[error("no features for emotion {0}")]
    MissingEmotionFeatures(Emotion),
    #[error("selector: {0}")]
    SelectorLoad(String),
    #[error(transparent)]
    Feature(#[from] crate::features::FeatureError),
    #[error(transparent)]
    Dataset(#[from] crate::dataset::DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: std::path::PathBuf,
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, ClassicalError>;

/// A classifier family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    KNearestNeighbors {
        k: usize,
    },
    DecisionTree {
        max_depth: Option<usize>,
        min_leaf: usize,
    },
    LogisticRegression {
        l2: f64,
    },
    GaussianNaiveBayes,
    RandomForest {
        trees: usize,
        max_depth: Option<usize>,
        min_leaf: usize,
    },
}

const KNN_K: [usize; 4] = [1, 3, 5, 7];
const TREE_DEPTHS: [Option<usize>; 4] = [Some(2), Some(4), Some(8), None];
const TREE_MIN_LEAF: [usize; 3] = [1, 3, 5];
const L2_STRENGTHS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const FOREST_TREES: [usize; 2] = [25, 100];

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::KNearestNeighbors { .. } => "k_nearest_neighbors",
            ModelSpec::DecisionTree { .. } => "decision_tree",
            ModelSpec::LogisticRegression { .. } => "logistic_regression",
            ModelSpec::GaussianNaiveBayes => "gaussian_naive_bayes",
            ModelSpec::RandomForest { .. } => "random_forest",
        }
    }

    /// Number of hyperparameters; the search prefers fewer on ties.
    pub fn hyperparameter_count(&self) -> usize {
        match self {
            ModelSpec::GaussianNaiveBayes => 0,
            ModelSpec::KNearestNeighbors { .. } | ModelSpec::LogisticRegression { .. } => 1,
            ModelSpec::DecisionTree { .. } => 2,
            ModelSpec::RandomForest { .. } => 3,
        }
    }

    /// The full search grid in canonical order: k-NN, tree, logistic,
    /// naive Bayes, forest.
    pub fn default_grid() -> Vec<ModelSpec> {
        let mut grid: Vec<ModelSpec> = KNN_K
            .iter()
            .map(|&k| ModelSpec::KNearestNeighbors { k })
            .collect();
        for &max_depth in &TREE_DEPTHS {
            for &min_leaf in &TREE_MIN_LEAF {
                grid.push(ModelSpec::DecisionTree {
                    max_depth,
                    min_leaf,
                });
            }
        }
        grid.extend(
            L2_STRENGTHS
                .iter()
                .map(|&l2| ModelSpec::LogisticRegression { l2 }),
        );
        grid.push(ModelSpec::GaussianNaiveBayes);
        for &trees in &FOREST_TREES {
            for &max_depth in &TREE_DEPTHS {
                for &min_leaf in &TREE_MIN_LEAF {
                    grid.push(ModelSpec::RandomForest {
                        trees,
                        max_depth,
                        min_leaf,
                    });
                }
            }
        }
        grid
    }

    /// Whether every hyperparameter comes from the documented grid.
    pub fn is_in_grid(&self) -> bool {
        match *self {
            ModelSpec::KNearestNeighbors { k } => KNN_K.contains(&k),
            ModelSpec::DecisionTree {
                max_depth,
                min_leaf,
            } => TREE_DEPTHS.contains(&max_depth) && TREE_MIN_LEAF.contains(&min_leaf),
            ModelSpec::LogisticRegression { l2 } => L2_STRENGTHS.contains(&l2),
            ModelSpec::GaussianNaiveBayes => true,
            ModelSpec::RandomForest {
                trees,
                max_depth,
                min_leaf,
            } => {
                FOREST_TREES.contains(&trees)
                    && TREE_DEPTHS.contains(&max_depth)
                    && TREE_MIN_LEAF.contains(&min_leaf)
            }
        }
    }

    pub fn fit(&self, x: &[Vec<f64>], y: &[bool], seed: u64) -> Result<FittedModel> {
        check_xy(x, y)?;
        let positives = y.iter().filter(|&&v| v).count();
        if positives == 0 || positives == y.len() {
            return Ok(FittedModel::Constant {
                probability: positives as f64 / y.len() as f64,
            });
        }
        Ok(match *self {
            ModelSpec::KNearestNeighbors { k } => FittedModel::Knn(KnnModel::fit(x, y, k)),
            ModelSpec::DecisionTree {
                max_depth,
                min_leaf,
            } => FittedModel::Tree(TreeModel::fit(
                x,
                y,
                &TreeParams {
                    max_depth,
                    min_leaf,
                    max_features: None,
                },
                seed,
            )),
            ModelSpec::LogisticRegression { l2 } => {
                FittedModel::Logistic(LogisticModel::fit(x, y, l2))
            }
            ModelSpec::GaussianNaiveBayes => FittedModel::NaiveBayes(GaussianNbModel::fit(x, y)),
            ModelSpec::RandomForest {
                trees,
                max_depth,
                min_leaf,
            } => FittedModel::Forest(ForestModel::fit(x, y, trees, max_depth, min_leaf, seed)),
        })
    }
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[bool]) -> Result<()> {
    let Some(first) = x.first() else {
        return Err(ClassicalError::EmptyInput);
    };
    if x.len() != y.len() {
        return Err(ClassicalError::LabelCountMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let d = first.len();
    for row in x {
        if row.len() != d {
            return Err(ClassicalError::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ClassicalError::NonFinite);
        }
    }
    Ok(())
}

/// Fitted parameters for any family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    /// Training labels held a single class.
    Constant {
        probability: f64,
    },
    Knn(KnnModel),
    Tree(TreeModel),
    Logistic(LogisticModel),
    NaiveBayes(GaussianNbModel),
    Forest(ForestModel),
}

impl FittedModel {
    /// Probability that the label is `true`.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let p = match self {
            FittedModel::Constant { probability } => *probability,
            FittedModel::Knn(m) => m.predict_proba(x),
            FittedModel::Tree(m) => m.predict_proba(x),
            FittedModel::Logistic(m) => m.predict_proba(x),
            FittedModel::NaiveBayes(m) => m.predict_proba(x),
            FittedModel::Forest(m) => m.predict_proba(x),
        };
        p.clamp(0.0, 1.0)
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= 0.5
    }

    pub fn accuracy(&self, x: &[Vec<f64>], y: &[bool]) -> f64 {
        accuracy(x.iter().map(|r| self.predict(r)), y)
    }
}

pub(crate) fn accuracy(predicted: impl Iterator<Item = bool>, truth: &[bool]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted.zip(truth).filter(|(p, t)| p == *t).count();
    correct as f64 / truth.len() as f64
}

/// Per-column mean and population standard deviation (1 for constant
/// columns), used by the distance- and gradient-based families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ColumnScaler {
    pub(crate) fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let d = x[0].len();
        let mut mean = vec![0.0; d];
        for row in x {
            for j in 0..d {
                mean[j] += row[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            for j in 0..d {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}
