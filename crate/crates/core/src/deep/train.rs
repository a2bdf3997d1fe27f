use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::check_sequence;
use super::network::{ModelKind, Network};
use super::DeepError;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 50,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 50,
            batch_size: 32,
            dropout_rate: 0.2,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DeepError> {
        let bad = |m: &str| Err(DeepError::InvalidConfig(m.to_string()));
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must be in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must be in [0, 1)");
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: &TrainConfig, num_params: usize) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    pub fn update(&mut self, params: &mut Network, grads: &Network) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let mut k = 0;
        for (p, g) in params
            .param_slices_mut()
            .into_iter()
            .zip(grads.param_slices())
        {
            for (pv, &gv) in p.iter_mut().zip(g) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gv;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gv * gv;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *pv -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                k += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches, dropout on.
    pub loss: f64,
    /// Accuracy on the full training set after the epoch, dropout off.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub network: Network,
    pub curve: Vec<EpochStats>,
}

pub fn loss_curve_csv(curve: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,train_accuracy\n");
    for s in curve {
        out.push_str(&format!(
            "{},{:.9},{:.6}\n",
            s.epoch, s.loss, s.train_accuracy
        ));
    }
    out
}

/// Accuracy of argmax predictions; label `true` is class 1.
pub fn network_accuracy(
    network: &Network,
    sequences: &[Vec<Vec<f64>>],
    labels: &[bool],
) -> Result<f64, DeepError> {
    let mut correct = 0;
    for (s, &l) in sequences.iter().zip(labels) {
        let p = network.predict_proba(s)?;
        if (p[1] >= 0.5) == l {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len().max(1) as f64)
}

/// Mini-batch training with full backpropagation through time.
///
/// Initialization uses stream `[0]` of `config.seed`; shuffling and dropout
/// masks use stream `[1]`. Batches are processed in order.
pub fn train(
    kind: ModelKind,
    sequences: &[Vec<Vec<f64>>],
    labels: &[bool],
    config: &TrainConfig,
) -> Result<TrainOutcome, DeepError> {
    config.validate()?;
    if sequences.is_empty() {
        return Err(DeepError::EmptyInput);
    }
    if sequences.len() != labels.len() {
        return Err(DeepError::LabelCountMismatch {
            sequences: sequences.len(),
            labels: labels.len(),
        });
    }
    let input_dim = sequences[0].first().map_or(0, Vec::len);
    for s in sequences {
        check_sequence(s, input_dim)?;
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(DeepError::DegenerateLabels);
    }

    let mut network = Network::init(
        kind,
        input_dim,
        config.hidden,
        seed::derive(config.seed, &[0]),
    );
    let mut adam = Adam::new(config, network.num_params());
    let mut rng = seed::rng(seed::derive(config.seed, &[1]));
    let keep = 1.0 - config.dropout_rate;
    let feature_dim = network.head.feature_dim;
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = network.zeros_like();
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let mask: Option<Vec<f64>> = (config.dropout_rate > 0.0).then(|| {
                    (0..feature_dim)
                        .map(|_| {
                            if rng.random_bool(keep) {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        })
                        .collect()
                });
                let label = labels[i] as usize;
                let (loss, _) = network.accumulate_gradient(
                    &sequences[i],
                    label,
                    mask.as_deref(),
                    weight,
                    &mut grads,
                )?;
                total_loss += loss;
            }
            adam.update(&mut network, &grads);
        }
        let stats = EpochStats {
            epoch,
            loss: total_loss / sequences.len() as f64,
            train_accuracy: network_accuracy(&network, sequences, labels)?,
        };
        log::debug!(
            "{kind} epoch {epoch}: loss {:.4} acc {:.3}",
            stats.loss,
            stats.train_accuracy
        );
        curve.push(stats);
    }
    Ok(TrainOutcome { network, curve })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradScope {
    /// Every parameter array of the network.
    All,
    /// Dense head only, recurrent features held fixed.
    HeadOnly,
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Largest relative error between analytic and central-difference
/// gradients of the single-sample loss, dropout off.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-8)`. Up to `coordinates`
/// parameters are drawn without replacement using `seed_value`.
pub fn grad_check(
    network: &Network,
    sequence: &[Vec<f64>],
    label: usize,
    scope: GradScope,
    coordinates: usize,
    seed_value: u64,
) -> Result<f64, DeepError> {
    let mut grads = network.zeros_like();
    network.accumulate_gradient(sequence, label, None, 1.0, &mut grads)?;

    let sizes: Vec<usize> = network.param_slices().iter().map(|s| s.len()).collect();
    let total: usize = sizes.iter().sum();
    let head_len = network.head.weights.len() + network.head.bias.len();
    let candidates: Vec<usize> = match scope {
        GradScope::All => (0..total).collect(),
        GradScope::HeadOnly => (total - head_len..total).collect(),
    };
    let mut rng = seed::rng(seed_value);
    let chosen: Vec<usize> = candidates
        .choose_multiple(&mut rng, coordinates.min(candidates.len()))
        .copied()
        .collect();

    let locate = |flat: usize| {
        let mut rest = flat;
        for (s, &len) in sizes.iter().enumerate() {
            if rest < len {
                return (s, rest);
            }
            rest -= len;
        }
        unreachable!("coordinate {flat} out of range")
    };
    let analytic_of = |flat: usize| {
        let (s, k) = locate(flat);
        grads.param_slices()[s][k]
    };

    let features = match scope {
        GradScope::HeadOnly => Some(network.features(sequence)?),
        GradScope::All => None,
    };
    let mut probe = network.clone();
    let eval = |probe: &Network| -> Result<f64, DeepError> {
        match &features {
            Some(f) => Ok(super::softmax_cross_entropy(&probe.head.logits(f), label).0),
            None => probe.loss(sequence, label),
        }
    };

    let mut worst: f64 = 0.0;
    for &flat in &chosen {
        let (s, k) = locate(flat);
        let original = probe.param_slices()[s][k];
        probe.param_slices_mut()[s][k] = original + GRAD_CHECK_STEP;
        let up = eval(&probe)?;
        probe.param_slices_mut()[s][k] = original - GRAD_CHECK_STEP;
        let down = eval(&probe)?;
        probe.param_slices_mut()[s][k] = original;
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let analytic = analytic_of(flat);
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    Ok(worst)
}
