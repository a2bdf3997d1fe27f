use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{bilstm_forward, lstm_backward, lstm_forward, LstmCache, LstmParams};
use super::DeepError;
use crate::seed;

pub const NUM_CLASSES: usize = 2;

/// Dense layer from recurrent features to class logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub num_classes: usize,
    pub feature_dim: usize,
    /// `num_classes` rows of `feature_dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HeadParams {
    pub fn zeros(feature_dim: usize) -> Self {
        Self {
            num_classes: NUM_CLASSES,
            feature_dim,
            weights: vec![0.0; NUM_CLASSES * feature_dim],
            bias: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn init(feature_dim: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(feature_dim);
        for v in p.weights.iter_mut().chain(p.bias.iter_mut()) {
            *v = rng.random_range(-0.08..0.08);
        }
        p
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        (0..self.num_classes)
            .map(|c| {
                let row = &self.weights[c * self.feature_dim..(c + 1) * self.feature_dim];
                self.bias[c] + row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    /// Add gradients for `d_logits` into `grads`; returns d(features).
    pub fn backward(&self, features: &[f64], d_logits: &[f64], grads: &mut HeadParams) -> Vec<f64> {
        let fd = self.feature_dim;
        let mut d_features = vec![0.0; fd];
        for (c, &dl) in d_logits.iter().enumerate() {
            grads.bias[c] += dl;
            let row = &self.weights[c * fd..(c + 1) * fd];
            let grow = &mut grads.weights[c * fd..(c + 1) * fd];
            for k in 0..fd {
                grow[k] += dl * features[k];
                d_features[k] += dl * row[k];
            }
        }
        d_features
    }
}

/// Max-subtracted softmax and the cross-entropy `-ln p[label]`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / sum).collect();
    let loss = sum.ln() - (logits[label] - max);
    (loss, probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Bilstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Lstm, ModelKind::Bilstm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Bilstm => "bilstm",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = DeepError;

    fn from_str(s: &str) -> Result<Self, DeepError> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "bilstm" => Ok(ModelKind::Bilstm),
            other => Err(DeepError::InvalidConfig(format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

/// Recurrent layer, optional dropout, dense head, softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: ModelKind,
    pub forward: LstmParams,
    /// Present exactly for [`ModelKind::Bilstm`].
    pub backward: Option<LstmParams>,
    pub head: HeadParams,
}

pub(crate) struct ForwardPass {
    pub features: Vec<f64>,
    forward: LstmCache,
    backward: Option<LstmCache>,
}

impl Network {
    pub fn init(kind: ModelKind, input_dim: usize, hidden: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let forward = LstmParams::init(input_dim, hidden, &mut rng);
        let backward = match kind {
            ModelKind::Lstm => None,
            ModelKind::Bilstm => Some(LstmParams::init(input_dim, hidden, &mut rng)),
        };
        let head = HeadParams::init(Self::feature_dim_for(kind, hidden), &mut rng);
        Self {
            kind,
            forward,
            backward,
            head,
        }
    }

    fn feature_dim_for(kind: ModelKind, hidden: usize) -> usize {
        match kind {
            ModelKind::Lstm => hidden,
            ModelKind::Bilstm => 2 * hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn zeros_like(&self) -> Self {
        let (d, h) = (self.input_dim(), self.hidden());
        Self {
            kind: self.kind,
            forward: LstmParams::zeros(d, h),
            backward: self.backward.as_ref().map(|_| LstmParams::zeros(d, h)),
            head: HeadParams::zeros(self.head.feature_dim),
        }
    }

    pub fn validate(&self) -> Result<(), DeepError> {
        self.forward.validate()?;
        match (&self.backward, self.kind) {
            (None, ModelKind::Lstm) => {}
            (Some(b), ModelKind::Bilstm) => {
                b.validate()?;
                if b.input_dim != self.forward.input_dim || b.hidden != self.forward.hidden {
                    return Err(DeepError::Bundle("directions differ in shape".into()));
                }
            }
            _ => {
                return Err(DeepError::Bundle(
                    "backward direction does not match kind".into(),
                ))
            }
        }
        let h = &self.head;
        if h.num_classes != NUM_CLASSES
            || h.feature_dim != Self::feature_dim_for(self.kind, self.hidden())
            || h.weights.len() != h.num_classes * h.feature_dim
            || h.bias.len() != h.num_classes
            || h.weights.iter().chain(&h.bias).any(|v| !v.is_finite())
        {
            return Err(DeepError::Bundle("head parameters malformed".into()));
        }
        Ok(())
    }

    /// All parameter arrays in a fixed order: forward LSTM, backward LSTM,
    /// head weights, head bias.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.forward.slices().to_vec();
        if let Some(b) = &self.backward {
            out.extend(b.slices());
        }
        out.push(&self.head.weights);
        out.push(&self.head.bias);
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.forward.slices_mut());
        if let Some(b) = &mut self.backward {
            out.extend(b.slices_mut());
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }

    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub(crate) fn run(&self, sequence: &[Vec<f64>]) -> Result<ForwardPass, DeepError> {
        Ok(match &self.backward {
            None => {
                let (features, forward) = lstm_forward(&self.forward, sequence)?;
                ForwardPass {
                    features,
                    forward,
                    backward: None,
                }
            }
            Some(b) => {
                let (features, forward, backward) = bilstm_forward(&self.forward, b, sequence)?;
                ForwardPass {
                    features,
                    forward,
                    backward: Some(backward),
                }
            }
        })
    }

    /// Recurrent output for `sequence` (length `hidden` or `2 * hidden`).
    pub fn features(&self, sequence: &[Vec<f64>]) -> Result<Vec<f64>, DeepError> {
        Ok(self.run(sequence)?.features)
    }

    /// Class probabilities with dropout off.
    pub fn predict_proba(&self, sequence: &[Vec<f64>]) -> Result<Vec<f64>, DeepError> {
        let logits = self.head.logits(&self.features(sequence)?);
        Ok(softmax_cross_entropy(&logits, 0).1)
    }

    pub fn loss(&self, sequence: &[Vec<f64>], label: usize) -> Result<f64, DeepError> {
        let logits = self.head.logits(&self.features(sequence)?);
        Ok(softmax_cross_entropy(&logits, label).0)
    }

    /// Loss for one sample; gradients scaled by `weight` are added into
    /// `grads`. `mask` multiplies the recurrent output (inverted dropout).
    pub fn accumulate_gradient(
        &self,
        sequence: &[Vec<f64>],
        label: usize,
        mask: Option<&[f64]>,
        weight: f64,
        grads: &mut Network,
    ) -> Result<(f64, Vec<f64>), DeepError> {
        let pass = self.run(sequence)?;
        let dropped: Vec<f64> = match mask {
            Some(m) => pass.features.iter().zip(m).map(|(f, k)| f * k).collect(),
            None => pass.features.clone(),
        };
        let logits = self.head.logits(&dropped);
        let (loss, probs) = softmax_cross_entropy(&logits, label);
        let d_logits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, p)| weight * (p - if c == label { 1.0 } else { 0.0 }))
            .collect();
        let mut d_features = self.head.backward(&dropped, &d_logits, &mut grads.head);
        if let Some(m) = mask {
            d_features.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
        }
        let h = self.hidden();
        lstm_backward(
            &self.forward,
            &pass.forward,
            &d_features[..h],
            &mut grads.forward,
        );
        if let (Some(b), Some(cache), Some(gb)) =
            (&self.backward, &pass.backward, &mut grads.backward)
        {
            lstm_backward(b, cache, &d_features[h..], gb);
        }
        Ok((loss, probs))
    }
}
