use rand::seq::{IteratorRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::{check_xy, ClassicalError, FittedModel, ModelSpec, Result};
use crate::seed;

/// Stratified fold assignment: each class is shuffled with `seed`, then
/// dealt round-robin, the positive class continuing where the negative
/// class stopped so fold sizes differ by at most one.
pub fn stratified_folds(y: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    let mut assignment = vec![0; y.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    assignment
}

fn check_cv_inputs(x: &[Vec<f64>], y: &[bool], folds: usize) -> Result<()> {
    check_xy(x, y)?;
    let folds = folds.max(2);
    if y.len() < folds {
        return Err(ClassicalError::TooFewSamples {
            needed: folds,
            got: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(ClassicalError::DegenerateLabels);
    }
    Ok(())
}

fn cv_with_assignment(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[bool],
    assignment: &[usize],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for fold in 0..folds {
        let (mut tx, mut ty, mut vx, mut vy) = (vec![], vec![], vec![], vec![]);
        for i in 0..y.len() {
            if assignment[i] == fold {
                vx.push(x[i].clone());
                vy.push(y[i]);
            } else {
                tx.push(x[i].clone());
                ty.push(y[i]);
            }
        }
        let model = spec.fit(&tx, &ty, seed::derive(seed, &[fold as u64]))?;
        total += model.accuracy(&vx, &vy);
    }
    Ok(total / folds as f64)
}

/// Mean held-out accuracy over a seeded stratified k-fold partition.
pub fn cross_validate(
    spec: &ModelSpec,
    x: &[Vec<f64>],
    y: &[bool],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    check_cv_inputs(x, y, folds)?;
    let folds = folds.max(2);
    let assignment = stratified_folds(y, folds, seed);
    cv_with_assignment(spec, x, y, &assignment, folds, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Evaluate every candidate.
    Grid,
    /// Evaluate a seeded random subset of this many candidates, kept in
    /// grid order.
    MaxEvaluations(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub candidates: Vec<ModelSpec>,
    pub folds: usize,
    pub budget: Budget,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            candidates: ModelSpec::default_grid(),
            folds: 5,
            budget: Budget::Grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub spec: ModelSpec,
    pub model: FittedModel,
    pub cv_accuracy: f64,
    pub training_accuracy: f64,
    /// Every evaluated candidate with its cross-validated accuracy.
    pub evaluated: Vec<(ModelSpec, f64)>,
}

const TIE_EPS: f64 = 1e-12;

/// Cross-validate candidates, keep the best, refit it on all of `(x, y)`.
///
/// All candidates share one fold partition. Ties on accuracy go to the
/// spec with fewer hyperparameters, then to the earlier candidate.
pub fn model_search(
    x: &[Vec<f64>],
    y: &[bool],
    config: &SearchConfig,
    seed: u64,
) -> Result<SearchResult> {
    check_cv_inputs(x, y, config.folds)?;
    let folds = config.folds.max(2);
    let candidates: Vec<&ModelSpec> = match config.budget {
        Budget::Grid => config.candidates.iter().collect(),
        Budget::MaxEvaluations(n) => {
            let mut rng = seed::rng(seed::derive(seed, &[u64::MAX]));
            let mut picked = (0..config.candidates.len()).choose_multiple(&mut rng, n);
            picked.sort_unstable();
            picked.into_iter().map(|i| &config.candidates[i]).collect()
        }
    };
    if candidates.is_empty() {
        return Err(ClassicalError::EmptySearchSpace);
    }

    let assignment = stratified_folds(y, folds, seed);
    let mut evaluated = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, spec) in candidates.iter().enumerate() {
        let acc = cv_with_assignment(spec, x, y, &assignment, folds, seed)?;
        evaluated.push(((*spec).clone(), acc));
        let better = match best {
            None => true,
            Some((j, best_acc)) => {
                acc > best_acc + TIE_EPS
                    || ((acc - best_acc).abs() <= TIE_EPS
                        && spec.hyperparameter_count() < candidates[j].hyperparameter_count())
            }
        };
        if better {
            best = Some((i, acc));
        }
    }

    let (winner, cv_accuracy) = best.expect("non-empty candidates");
    let spec = candidates[winner].clone();
    let model = spec.fit(x, y, seed::derive(seed, &[folds as u64]))?;
    let training_accuracy = model.accuracy(x, y);
    Ok(SearchResult {
        spec,
        model,
        cv_accuracy,
        training_accuracy,
        evaluated,
    })
}
