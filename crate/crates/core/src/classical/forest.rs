use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{TreeModel, TreeParams};
use crate::seed;

/// Bagged CART trees with `floor(sqrt(d))` features tried per split.
/// Tree `t` draws its bootstrap sample and feature subsets from
/// `derive(seed, [t])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[bool],
        trees: usize,
        max_depth: Option<usize>,
        min_leaf: usize,
        seed: u64,
    ) -> Self {
        let n = x.len();
        let d = x[0].len();
        let params = TreeParams {
            max_depth,
            min_leaf,
            max_features: Some(((d as f64).sqrt().floor() as usize).max(1)),
        };
        let trees = (0..trees.max(1))
            .map(|t| {
                let tree_seed = seed::derive(seed, &[t as u64]);
                let mut rng = seed::rng(tree_seed);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                TreeModel::fit_indices(x, y, idx, &params, seed::splitmix64(tree_seed))
            })
            .collect();
        Self { trees }
    }

    /// Mean of the trees' leaf probabilities.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(x)).sum::<f64>() / self.trees.len() as f64
    }
}
