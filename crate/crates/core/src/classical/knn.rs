use serde::{Deserialize, Serialize};

use super::ColumnScaler;

/// k-nearest-neighbours on z-scored features with Euclidean distance.
/// Distance ties resolve to the earlier training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub scaler: ColumnScaler,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[bool], k: usize) -> Self {
        let scaler = ColumnScaler::fit(x);
        let points = x.iter().map(|r| scaler.apply(r)).collect();
        Self {
            k: k.max(1),
            scaler,
            points,
            labels: y.to_vec(),
        }
    }

    /// Fraction of positive labels among the `k` nearest training rows.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let q = self.scaler.apply(x);
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let positives = dist[..k].iter().filter(|(_, i)| self.labels[*i]).count();
        positives as f64 / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_nearest_neighbour_recalls_training_points() {
        let x = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![5.0, 5.0],
            vec![5.1, 5.0],
        ];
        let y = [false, false, true, true];
        let m = KnnModel::fit(&x, &y, 1);
        for (row, label) in x.iter().zip(y) {
            assert_eq!(m.predict_proba(row), if label { 1.0 } else { 0.0 });
        }
        assert_eq!(m.predict_proba(&[4.0, 4.0]), 1.0);
    }

    #[test]
    fn k_larger_than_training_set_uses_all_rows() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = KnnModel::fit(&x, &[true, false, false], 7);
        assert!((m.predict_proba(&[0.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_makes_units_irrelevant() {
        // Second feature is informative but tiny; without scaling the first
        // (noise, large) would dominate.
        let x = vec![
            vec![1000.0, 0.0],
            vec![-1000.0, 0.001],
            vec![1000.0, 0.01],
            vec![-1000.0, 0.011],
        ];
        let y = [false, false, true, true];
        let m = KnnModel::fit(&x, &y, 1);
        assert_eq!(m.predict_proba(&[900.0, 0.0105]), 1.0);
    }
}
