//! Fully connected networks with exact backpropagation.
//!
//! Layer `i` computes `y_i = σ_i(W_i y_{i-1} + b_i)`; weights are stored
//! `out × in`, i.e. already transposed relative to the column convention
//! `w_iᵗ y_{i-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{squared_distance, Matrix, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Sigmoid => sigmoid(a),
            Activation::Identity => a,
            Activation::Relu => a.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_size(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weights.rows()
    }
}

/// Parameters θ = {(W_i, b_i)} of a multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

/// Per-layer outputs `y_0 = x, y_1, …, y_L` from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least the input")
    }
}

/// Gradient buffers shaped like [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.as_slice().len()])
                .collect(),
            bias: params.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.bias.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn scale(&mut self, s: f64) {
        self.iter_mut().for_each(|g| *g *= s);
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }
}

impl MlpParams {
    /// Xavier-uniform weights, zero biases.
    pub fn xavier(sizes: &[usize], activations: &[Activation], rng: &mut RandomStream) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return domain("need one activation per layer and at least two sizes");
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.uniform_range(-limit, limit))
                    .collect();
                Layer {
                    weights: Matrix::new(fan_out, fan_in, data).expect("finite by construction"),
                    bias: vec![0.0; fan_out],
                    activation: act,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, Layer::input_size)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, Layer::output_size)
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size()];
        s.extend(self.layers.iter().map(Layer::output_size));
        s
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| {
            let Layer { weights, bias, .. } = l;
            weights.as_mut_slice().iter_mut().chain(bias.iter_mut())
        })
    }

    /// Checks that layer dimensions chain and every parameter is finite.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return domain("network has no layers");
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].output_size() != pair[1].input_size() {
                return domain(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].output_size(),
                    i + 1,
                    pair[1].input_size()
                ));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.bias.len() != l.output_size() {
                return domain(format!("layer {i} bias length mismatch"));
            }
        }
        if !self.iter().all(|v| v.is_finite()) {
            return domain("non-finite network parameter");
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_size() {
            return domain(format!(
                "network expects input of length {}, got {}",
                self.input_size(),
                x.len()
            ));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let prev = activations.last().expect("nonempty");
            let out: Vec<f64> = (0..layer.output_size())
                .map(|i| {
                    let pre: f64 = layer
                        .weights
                        .row(i)
                        .iter()
                        .zip(prev)
                        .map(|(w, y)| w * y)
                        .sum::<f64>()
                        + layer.bias[i];
                    layer.activation.apply(pre)
                })
                .collect();
            activations.push(out);
        }
        Ok(ForwardCache { activations })
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.activations.pop().expect("nonempty"))
    }

    /// Backpropagates `grad_output = ∂J/∂output`, accumulating parameter
    /// gradients into `grads` and returning `∂J/∂input`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        grad_output: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        if cache.activations.len() != self.layers.len() + 1
            || cache
                .activations
                .iter()
                .zip(self.sizes())
                .any(|(a, s)| a.len() != s)
        {
            return domain("forward cache does not match this network");
        }
        if grad_output.len() != self.output_size() {
            return domain(format!(
                "output gradient has length {}, network outputs {}",
                grad_output.len(),
                self.output_size()
            ));
        }
        if grads.weights.len() != self.layers.len() {
            return domain("gradient buffer does not match this network");
        }

        let mut upstream = grad_output.to_vec();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[li + 1];
            let y_prev = &cache.activations[li];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(y)
                .map(|(g, &yi)| g * layer.activation.derivative_from_output(yi))
                .collect();
            let gw = &mut grads.weights[li];
            let n_in = layer.input_size();
            for (i, &di) in delta.iter().enumerate() {
                if di == 0.0 {
                    continue;
                }
                let row = &mut gw[i * n_in..(i + 1) * n_in];
                for (g, &yp) in row.iter_mut().zip(y_prev) {
                    *g += di * yp;
                }
            }
            for (gb, &di) in grads.bias[li].iter_mut().zip(&delta) {
                *gb += di;
            }
            upstream = layer.weights.tr_matvec(&delta)?;
        }
        Ok(upstream)
    }

    /// Convenience wrapper returning fresh gradient buffers.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let input_grad = self.backward_into(cache, grad_output, &mut grads)?;
        Ok((grads, input_grad))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepDirection {
    Ascent,
    Descent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub direction: StepDirection,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            direction: StepDirection::Descent,
        }
    }
}

/// First/second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams) -> Self {
        let n = params.param_count();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if state.m.len() != params.param_count() {
        return domain("optimizer state does not match the network");
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let sign = match cfg.direction {
        StepDirection::Ascent => 1.0,
        StepDirection::Descent => -1.0,
    };
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads.iter())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p += sign * cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// `‖x − x′‖²`
    Raw,
    /// `min(‖x − x′‖² / d, 1)`
    Normalized,
}

pub fn recon_loss(x: &[f64], x_rec: &[f64], mode: LossMode) -> Result<f64> {
    if x.len() != x_rec.len() {
        return Err(Error::Domain(format!(
            "reconstruction length {} does not match input length {}",
            x_rec.len(),
            x.len()
        )));
    }
    let raw = squared_distance(x, x_rec);
    Ok(match mode {
        LossMode::Raw => raw,
        LossMode::Normalized => {
            if x.is_empty() {
                0.0
            } else {
                (raw / x.len() as f64).min(1.0)
            }
        }
    })
}

/// Epoch-level reconstruction aggregate `(1 / (m √d)) Σ ‖x_i − x′_i‖²`.
pub fn recon_aggregate(raw_losses: &[f64], dim: usize) -> f64 {
    if raw_losses.is_empty() || dim == 0 {
        return 0.0;
    }
    raw_losses.iter().sum::<f64>() / (raw_losses.len() as f64 * (dim as f64).sqrt())
}
