use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::seed;

/// CART growth limits.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features considered per split; `None` considers all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        probability: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Index of the `x[feature] <= threshold` child.
        left: usize,
        right: usize,
    },
}

/// Binary classification tree grown with Gini impurity. Nodes live in a
/// flat arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<Node>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    params: &'a TreeParams,
    rng: rand_chacha::ChaCha8Rng,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probability: pos as f64 / n as f64,
            samples: n,
        });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let min_leaf = self.params.min_leaf.max(1);
        if !depth_ok || pos == 0 || pos == n || n < 2 * min_leaf {
            return slot;
        }
        let Some(best) = self.best_split(&idx, pos) else {
            return slot;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut f = sample(&mut self.rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize], pos: usize) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let parent = gini(pos, n);
        let mut best: Option<BestSplit> = None;
        let mut order = idx.to_vec();

        for feature in self.candidate_features() {
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left_pos = 0;
            for k in 0..n - 1 {
                if self.y[order[k]] {
                    left_pos += 1;
                }
                let left_n = k + 1;
                let right_n = n - left_n;
                let lo = self.x[order[k]][feature];
                let hi = self.x[order[k + 1]][feature];
                if lo == hi || left_n < min_leaf || right_n < min_leaf {
                    continue;
                }
                let impurity = (left_n as f64 * gini(left_pos, left_n)
                    + right_n as f64 * gini(pos - left_pos, right_n))
                    / n as f64;
                if impurity < parent - 1e-12
                    && best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-12)
                {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

impl TreeModel {
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &TreeParams, seed: u64) -> Self {
        Self::fit_indices(x, y, (0..x.len()).collect(), params, seed)
    }

    /// Grow on a subset (with repeats) of the rows, as bagging needs.
    pub(crate) fn fit_indices(
        x: &[Vec<f64>],
        y: &[bool],
        idx: Vec<usize>,
        params: &TreeParams,
        seed: u64,
    ) -> Self {
        let mut g = Grower {
            x,
            y,
            params,
            rng: seed::rng(seed),
            nodes: Vec::new(),
        };
        g.grow(idx, 0);
        Self { nodes: g.nodes }
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { probability, .. } => return *probability,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(max_depth: Option<usize>, min_leaf: usize) -> TreeParams {
        TreeParams {
            max_depth,
            min_leaf,
            max_features: None,
        }
    }

    #[test]
    fn learns_interval_labels() {
        // Label is true on levels 1 and 3 of a four-level feature.
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 4) as f64, 0.5]).collect();
        let y: Vec<bool> = (0..40).map(|i| i % 2 == 1).collect();
        let t = TreeModel::fit(&x, &y, &params(Some(4), 1), 0);
        for (row, label) in x.iter().zip(&y) {
            assert_eq!(t.predict_proba(row) >= 0.5, *label);
        }
        assert!(t.depth() <= 4);
    }

    #[test]
    fn depth_limit_respected() {
        let x: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..64).map(|i| (i / 3) % 2 == 0).collect();
        let t = TreeModel::fit(&x, &y, &params(Some(2), 1), 0);
        assert!(t.depth() <= 2);
        let full = TreeModel::fit(&x, &y, &params(None, 1), 0);
        assert!(x
            .iter()
            .zip(&y)
            .all(|(r, l)| (full.predict_proba(r) >= 0.5) == *l));
    }

    #[test]
    fn min_leaf_respected() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..20).map(|i| i == 0).collect();
        let t = TreeModel::fit(&x, &y, &params(None, 5), 0);
        for node in &t.nodes {
            if let Node::Leaf { samples, .. } = node {
                assert!(*samples >= 5);
            }
        }
    }

    #[test]
    fn constant_features_give_a_single_leaf() {
        let x = vec![vec![1.0]; 6];
        let y = [true, false, true, false, true, true];
        let t = TreeModel::fit(&x, &y, &params(None, 1), 0);
        assert_eq!(t.nodes.len(), 1);
        assert!((t.predict_proba(&[1.0]) - 4.0 / 6.0).abs() < 1e-15);
    }
}
