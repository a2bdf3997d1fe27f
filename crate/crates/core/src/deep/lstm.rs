use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DeepError;

/// Weights of one LSTM direction.
///
/// Gate blocks are stacked in the order input, forget, output, candidate;
/// block `k` of `input_weights` is rows `k*hidden..(k+1)*hidden`, each row
/// `input_dim` wide, all row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub input_weights: Vec<f64>,
    pub recurrent_weights: Vec<f64>,
    pub bias: Vec<f64>,
}

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CANDIDATE: usize = 3;

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            hidden,
            input_weights: vec![0.0; 4 * hidden * input_dim],
            recurrent_weights: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Uniform(-0.08, 0.08) everywhere, then +1 on the forget-gate bias.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        for v in p
            .input_weights
            .iter_mut()
            .chain(p.recurrent_weights.iter_mut())
            .chain(p.bias.iter_mut())
        {
            *v = rng.random_range(-0.08..0.08);
        }
        for v in &mut p.bias[GATE_FORGET * hidden..(GATE_FORGET + 1) * hidden] {
            *v += 1.0;
        }
        p
    }

    pub fn validate(&self) -> Result<(), DeepError> {
        let h = self.hidden;
        let shapes_ok = self.input_weights.len() == 4 * h * self.input_dim
            && self.recurrent_weights.len() == 4 * h * h
            && self.bias.len() == 4 * h;
        if !shapes_ok {
            return Err(DeepError::Bundle(format!(
                "LSTM arrays do not match input_dim {} / hidden {h}",
                self.input_dim
            )));
        }
        if self
            .slices()
            .iter()
            .any(|s| s.iter().any(|v| !v.is_finite()))
        {
            return Err(DeepError::Bundle("non-finite LSTM parameter".into()));
        }
        Ok(())
    }

    pub(crate) fn slices(&self) -> [&[f64]; 3] {
        [&self.input_weights, &self.recurrent_weights, &self.bias]
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 3] {
        [
            &mut self.input_weights,
            &mut self.recurrent_weights,
            &mut self.bias,
        ]
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: usize,
    inputs: Vec<f64>,
    /// Post-activation gates per step, `4 * hidden` wide in block order.
    gates: Vec<f64>,
    cells: Vec<f64>,
    hiddens: Vec<f64>,
}

pub(crate) fn check_sequence(sequence: &[Vec<f64>], input_dim: usize) -> Result<(), DeepError> {
    if sequence.is_empty() {
        return Err(DeepError::EmptySequence);
    }
    for row in sequence {
        if row.len() != input_dim {
            return Err(DeepError::DimensionMismatch {
                expected: input_dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DeepError::NonFiniteInput);
        }
    }
    Ok(())
}

/// Run the recurrence from zero state; returns the last hidden state.
pub fn lstm_forward(
    params: &LstmParams,
    sequence: &[Vec<f64>],
) -> Result<(Vec<f64>, LstmCache), DeepError> {
    check_sequence(sequence, params.input_dim)?;
    let (d, h) = (params.input_dim, params.hidden);
    let steps = sequence.len();
    let mut cache = LstmCache {
        steps,
        inputs: Vec::with_capacity(steps * d),
        gates: vec![0.0; steps * 4 * h],
        cells: vec![0.0; steps * h],
        hiddens: vec![0.0; steps * h],
    };
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut pre = vec![0.0; 4 * h];
    for (t, x) in sequence.iter().enumerate() {
        cache.inputs.extend_from_slice(x);
        for r in 0..4 * h {
            let wx = &params.input_weights[r * d..(r + 1) * d];
            let uh = &params.recurrent_weights[r * h..(r + 1) * h];
            let mut acc = params.bias[r];
            for k in 0..d {
                acc += wx[k] * x[k];
            }
            for k in 0..h {
                acc += uh[k] * h_prev[k];
            }
            pre[r] = acc;
        }
        let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let i = sigmoid(pre[GATE_INPUT * h + j]);
            let f = sigmoid(pre[GATE_FORGET * h + j]);
            let o = sigmoid(pre[GATE_OUTPUT * h + j]);
            let g = pre[GATE_CANDIDATE * h + j].tanh();
            let c = f * c_prev[j] + i * g;
            let hv = o * c.tanh();
            gates[GATE_INPUT * h + j] = i;
            gates[GATE_FORGET * h + j] = f;
            gates[GATE_OUTPUT * h + j] = o;
            gates[GATE_CANDIDATE * h + j] = g;
            cache.cells[t * h + j] = c;
            cache.hiddens[t * h + j] = hv;
            c_prev[j] = c;
            h_prev[j] = hv;
        }
    }
    Ok((h_prev, cache))
}

/// Backpropagate `d_last` (gradient of the loss with respect to the final
/// hidden state) through time, adding parameter gradients into `grads`.
pub fn lstm_backward(
    params: &LstmParams,
    cache: &LstmCache,
    d_last: &[f64],
    grads: &mut LstmParams,
) {
    let (d, h) = (params.input_dim, params.hidden);
    let mut dh = d_last.to_vec();
    let mut dc_next = vec![0.0; h];
    let mut da = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];
    for t in (0..cache.steps).rev() {
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let c = &cache.cells[t * h..(t + 1) * h];
        let (c_prev, h_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                &cache.cells[(t - 1) * h..t * h],
                &cache.hiddens[(t - 1) * h..t * h],
            )
        };
        for j in 0..h {
            let i = gates[GATE_INPUT * h + j];
            let f = gates[GATE_FORGET * h + j];
            let o = gates[GATE_OUTPUT * h + j];
            let g = gates[GATE_CANDIDATE * h + j];
            let tc = c[j].tanh();
            let d_o = dh[j] * tc;
            let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
            da[GATE_INPUT * h + j] = dc * g * i * (1.0 - i);
            da[GATE_FORGET * h + j] = dc * c_prev[j] * f * (1.0 - f);
            da[GATE_OUTPUT * h + j] = d_o * o * (1.0 - o);
            da[GATE_CANDIDATE * h + j] = dc * i * (1.0 - g * g);
            dc_next[j] = dc * f;
        }
        let x = &cache.inputs[t * d..(t + 1) * d];
        dh.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..4 * h {
            let a = da[r];
            if a == 0.0 {
                continue;
            }
            grads.bias[r] += a;
            let gw = &mut grads.input_weights[r * d..(r + 1) * d];
            for k in 0..d {
                gw[k] += a * x[k];
            }
            let gu = &mut grads.recurrent_weights[r * h..(r + 1) * h];
            let u = &params.recurrent_weights[r * h..(r + 1) * h];
            for k in 0..h {
                gu[k] += a * h_prev[k];
                dh[k] += a * u[k];
            }
        }
    }
}

/// Forward pass over `sequence` and a second, independent LSTM over the
/// reversed sequence; last states concatenated (forward half first).
pub fn bilstm_forward(
    forward: &LstmParams,
    backward: &LstmParams,
    sequence: &[Vec<f64>],
) -> Result<(Vec<f64>, LstmCache, LstmCache), DeepError> {
    let (mut out, fc) = lstm_forward(forward, sequence)?;
    let reversed: Vec<Vec<f64>> = sequence.iter().rev().cloned().collect();
    let (hb, bc) = lstm_forward(backward, &reversed)?;
    out.extend(hb);
    Ok((out, fc, bc))
}
