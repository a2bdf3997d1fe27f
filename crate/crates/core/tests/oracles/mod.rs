//! Slow, direct reference implementations used to check the fast paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A small random binary problem with both classes present.
pub struct Instance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<bool>,
    pub probes: Vec<Vec<f64>>,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(6..=30);
    let d = rng.random_range(1..=4);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
    let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..20.0)).collect();
    let mut y: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    y[0] = true;
    y[1] = false;
    let row = |label: bool, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|j| {
                let shift = if label { offset[j] } else { 0.0 };
                (noise.sample(rng) + shift) * scale[j]
            })
            .collect()
    };
    let x: Vec<Vec<f64>> = y.iter().map(|&l| row(l, &mut rng)).collect();
    let mut probes = x.clone();
    for _ in 0..10 {
        let label = rng.random_bool(0.5);
        probes.push(row(label, &mut rng));
    }
    Instance { x, y, probes }
}

fn column(x: &[Vec<f64>], j: usize) -> Vec<f64> {
    x.iter().map(|r| r[j]).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64
}

/// Gaussian naive Bayes posterior from the density product itself, with
/// per-class variance smoothed by 1e-9 times the largest overall variance.
pub fn naive_bayes_posterior(x: &[Vec<f64>], y: &[bool], probe: &[f64]) -> f64 {
    let d = x[0].len();
    let eps = 1e-9 * (0..d).map(|j| pop_var(&column(x, j))).fold(0.0, f64::max);
    let mut joint = [0.0; 2];
    for (c, class) in [false, true].into_iter().enumerate() {
        let rows: Vec<Vec<f64>> = x
            .iter()
            .zip(y)
            .filter(|(_, &l)| l == class)
            .map(|(r, _)| r.clone())
            .collect();
        let mut density = rows.len() as f64 / x.len() as f64;
        for j in 0..d {
            let col = column(&rows, j);
            let mu = mean(&col);
            let s2 = pop_var(&col) + eps;
            density *= (-(probe[j] - mu).powi(2) / (2.0 * s2)).exp()
                / (2.0 * std::f64::consts::PI * s2).sqrt();
        }
        joint[c] = density;
    }
    joint[1] / (joint[0] + joint[1])
}

/// L2-penalized logistic regression on z-scored features solved by plain
/// full-batch gradient descent; returns a probability function.
pub fn logistic_by_gradient_descent(x: &[Vec<f64>], y: &[bool], l2: f64) -> impl Fn(&[f64]) -> f64 {
    let n = x.len();
    let d = x[0].len();
    let mu: Vec<f64> = (0..d).map(|j| mean(&column(x, j))).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| {
            let s = pop_var(&column(x, j)).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..d).map(|j| (r[j] - mu[j]) / sd[j]).collect())
        .collect();
    let t: Vec<f64> = y.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let frob: f64 = z
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .sum();
    let step = 1.0 / (0.25 * frob + l2);

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..20_000_000 {
        let mut gw: Vec<f64> = w.iter().map(|wj| l2 * wj).collect();
        let mut gb = 0.0;
        for i in 0..n {
            let s = b + (0..d).map(|j| w[j] * z[i][j]).sum::<f64>();
            let r = 1.0 / (1.0 + (-s).exp()) - t[i];
            for j in 0..d {
                gw[j] += r * z[i][j];
            }
            gb += r;
        }
        let norm = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if norm.sqrt() < 1e-11 {
            break;
        }
        for j in 0..d {
            w[j] -= step * gw[j];
        }
        b -= step * gb;
    }
    move |probe: &[f64]| {
        let s = b
            + (0..d)
                .map(|j| w[j] * (probe[j] - mu[j]) / sd[j])
                .sum::<f64>();
        1.0 / (1.0 + (-s).exp())
    }
}
