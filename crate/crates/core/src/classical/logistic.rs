use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ColumnScaler;

/// L2-regularized logistic regression on z-scored features.
///
/// Minimizes `sum_i [softplus(z_i) - y_i z_i] + (l2 / 2) |w|^2` with
/// `z = w . x + b`; the bias is not penalized. Solved by damped Newton
/// iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub l2: f64,
    pub scaler: ColumnScaler,
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

const MAX_NEWTON_STEPS: usize = 200;

impl LogisticModel {
    pub fn fit(x: &[Vec<f64>], y: &[bool], l2: f64) -> Self {
        let scaler = ColumnScaler::fit(x);
        let n = x.len();
        let d = x[0].len();
        // Design matrix with a trailing bias column.
        let design = DMatrix::from_fn(n, d + 1, |i, j| {
            if j == d {
                1.0
            } else {
                (x[i][j] - scaler.mean[j]) / scaler.scale[j]
            }
        });
        let target = DVector::from_fn(n, |i, _| if y[i] { 1.0 } else { 0.0 });
        let penalty = DVector::from_fn(d + 1, |j, _| if j == d { 0.0 } else { l2 });

        let objective = |theta: &DVector<f64>| -> f64 {
            let z = &design * theta;
            let data: f64 = z
                .iter()
                .zip(target.iter())
                .map(|(&zi, &yi)| softplus(zi) - yi * zi)
                .sum();
            data + 0.5 * theta.component_mul(theta).dot(&penalty)
        };

        let mut theta = DVector::zeros(d + 1);
        let mut value = objective(&theta);
        for _ in 0..MAX_NEWTON_STEPS {
            let z = &design * &theta;
            let p = z.map(sigmoid);
            let grad = design.transpose() * (&p - &target) + penalty.component_mul(&theta);
            let w = p.map(|pi| pi * (1.0 - pi));
            let mut hess = design.transpose() * DMatrix::from_diagonal(&w) * &design;
            for j in 0..=d {
                hess[(j, j)] += penalty[j] + 1e-12;
            }
            let Some(step) = hess
                .clone()
                .cholesky()
                .map(|c| c.solve(&grad))
                .or_else(|| hess.lu().solve(&grad))
            else {
                break;
            };
            let decrement = grad.dot(&step);
            if !(decrement > 1e-24) {
                break;
            }
            let mut t = 1.0;
            loop {
                let candidate = &theta - t * &step;
                let cv = objective(&candidate);
                if cv <= value - 1e-4 * t * decrement || t < 1e-10 {
                    theta = candidate;
                    value = cv;
                    break;
                }
                t *= 0.5;
            }
        }

        Self {
            l2,
            scaler,
            weights: theta.as_slice()[..d].to_vec(),
            bias: theta[d],
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        let xs = self.scaler.apply(x);
        self.bias
            + self
                .weights
                .iter()
                .zip(&xs)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((softplus(-1000.0)).abs() < 1e-300);
        assert_eq!(softplus(1000.0), 1000.0);
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.37).sin() * 3.0, i as f64 * 0.1])
            .collect();
        let y: Vec<bool> = (0..20).map(|i| (i * 5) % 7 < 3).collect();
        let m = LogisticModel::fit(&x, &y, 0.1);
        let mut grad = vec![0.0; 3];
        for (row, &label) in x.iter().zip(&y) {
            let r = m.predict_proba(row) - if label { 1.0 } else { 0.0 };
            let xs = m.scaler.apply(row);
            grad[0] += r * xs[0];
            grad[1] += r * xs[1];
            grad[2] += r;
        }
        grad[0] += 0.1 * m.weights[0];
        grad[1] += 0.1 * m.weights[1];
        assert!(grad.iter().all(|g| g.abs() < 1e-9), "{grad:?}");
    }

    #[test]
    fn separable_data_stays_finite() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..10).map(|i| i >= 5).collect();
        let m = LogisticModel::fit(&x, &y, 0.01);
        assert!(m.weights[0].is_finite() && m.weights[0] > 0.0);
        assert!(m.predict_proba(&[9.0]) > 0.99);
        assert!(m.predict_proba(&[0.0]) < 0.01);
    }
}
