use serde::{Deserialize, Serialize};

/// Gaussian naive Bayes.
///
/// Class-conditional variances are maximum-likelihood estimates plus
/// `1e-9` times the largest per-feature variance of the whole training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    /// Index 0 is the `false` class, 1 the `true` class.
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

const VAR_SMOOTHING: f64 = 1e-9;

impl GaussianNbModel {
    pub fn fit(x: &[Vec<f64>], y: &[bool]) -> Self {
        let n = x.len();
        let d = x[0].len();

        let mut overall_mean = vec![0.0; d];
        for row in x {
            for j in 0..d {
                overall_mean[j] += row[j] / n as f64;
            }
        }
        let mut max_var: f64 = 0.0;
        for j in 0..d {
            let v = x
                .iter()
                .map(|r| (r[j] - overall_mean[j]).powi(2))
                .sum::<f64>()
                / n as f64;
            max_var = max_var.max(v);
        }
        let epsilon = VAR_SMOOTHING * max_var;

        let stats = |class: bool| {
            let rows: Vec<&Vec<f64>> = x
                .iter()
                .zip(y)
                .filter(|(_, &l)| l == class)
                .map(|(r, _)| r)
                .collect();
            let nc = rows.len() as f64;
            let mean: Vec<f64> = (0..d)
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nc)
                .collect();
            let var: Vec<f64> = (0..d)
                .map(|j| rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / nc + epsilon)
                .collect();
            (nc, mean, var)
        };
        let (n0, m0, v0) = stats(false);
        let (n1, m1, v1) = stats(true);
        Self {
            log_prior: [(n0 / n as f64).ln(), (n1 / n as f64).ln()],
            mean: [m0, m1],
            var: [v0, v1],
        }
    }

    fn joint_log_likelihood(&self, x: &[f64], class: usize) -> f64 {
        let ll: f64 = x
            .iter()
            .zip(&self.mean[class])
            .zip(&self.var[class])
            .map(|((v, m), s2)| {
                if *s2 > 0.0 {
                    -0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m).powi(2) / s2)
                } else if v == m {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
            .sum();
        self.log_prior[class] + ll
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let l0 = self.joint_log_likelihood(x, 0);
        let l1 = self.joint_log_likelihood(x, 1);
        let hi = l0.max(l1);
        if hi == f64::NEG_INFINITY {
            return 0.5;
        }
        let e0 = (l0 - hi).exp();
        let e1 = (l1 - hi).exp();
        e1 / (e0 + e1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_separated_classes() {
        let x = vec![vec![0.0], vec![0.2], vec![10.0], vec![10.2]];
        let m = GaussianNbModel::fit(&x, &[false, false, true, true]);
        assert!(m.predict_proba(&[0.1]) < 1e-6);
        assert!(m.predict_proba(&[10.1]) > 1.0 - 1e-6);
        assert!((m.log_prior[0] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn all_constant_features_fall_back_to_prior() {
        let x = vec![vec![1.0]; 4];
        let m = GaussianNbModel::fit(&x, &[false, true, true, true]);
        assert!((m.predict_proba(&[1.0]) - 0.75).abs() < 1e-12);
        assert_eq!(m.predict_proba(&[2.0]), 0.5);
    }
}
