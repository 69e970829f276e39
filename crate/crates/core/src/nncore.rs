//! Dense feed-forward networks with analytic backpropagation, MSE and Adam.
//!
//! Parameters of a network live in one flat vector. The canonical order is,
//! for each layer in turn, the weight matrix in row-major (output-neuron-major)
//! order followed by the bias vector. Checkpoints and the generator's output
//! both rely on this order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative expressed through the pre-activation `pre` and output `post`.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - post * post,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture of a dense network: layer widths plus activations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawNetSpec")]
pub struct NetSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
}

#[derive(Deserialize)]
struct RawNetSpec {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
}

impl TryFrom<RawNetSpec> for NetSpec {
    type Error = Error;

    fn try_from(raw: RawNetSpec) -> Result<Self> {
        NetSpec::new(raw.layer_sizes, raw.hidden_activation, raw.output_activation)
    }
}

impl NetSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpec(format!("layer {pos} has size 0")));
        }
        if hidden_activation == Activation::Identity && layer_sizes.len() > 2 {
            return Err(Error::InvalidSpec("hidden activation must be tanh or relu".into()));
        }
        if output_activation == Activation::Relu {
            return Err(Error::InvalidSpec("output activation must be identity or tanh".into()));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers.
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.depth() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Offset of layer `l`'s weight block in the flat vector.
    fn offset(&self, layer: usize) -> usize {
        self.layer_sizes[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Half-width of the uniform initialization interval for layer `l`:
    /// `sqrt(6 / (fan_in + fan_out))`.
    pub fn init_bound(&self, layer: usize) -> f64 {
        let fan = (self.layer_sizes[layer] + self.layer_sizes[layer + 1]) as f64;
        libm::sqrt(6.0 / fan)
    }

    /// Glorot-uniform weights, zero biases. Weights of the last layer are
    /// multiplied by `output_scale`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R, output_scale: f64) -> FlatParams {
        let mut values = Vec::with_capacity(self.param_count());
        for l in 0..self.depth() {
            let bound = self.init_bound(l);
            let scale = if l + 1 == self.depth() { output_scale } else { 1.0 };
            let n_w = self.layer_sizes[l] * self.layer_sizes[l + 1];
            values.extend((0..n_w).map(|_| rng.random_range(-bound..=bound) * scale));
            values.extend(core::iter::repeat_n(0.0, self.layer_sizes[l + 1]));
        }
        FlatParams {
            spec: self.clone(),
            values,
        }
    }
}

/// Every weight and bias of one network, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFlatParams")]
pub struct FlatParams {
    #[serde(flatten)]
    spec: NetSpec,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawFlatParams {
    #[serde(flatten)]
    spec: NetSpec,
    values: Vec<f64>,
}

impl TryFrom<RawFlatParams> for FlatParams {
    type Error = Error;

    fn try_from(raw: RawFlatParams) -> Result<Self> {
        FlatParams::new(raw.spec, raw.values)
    }
}

/// Borrowed view of one layer inside a [`FlatParams`].
#[derive(Clone, Copy, Debug)]
pub struct LayerView<'a> {
    pub n_in: usize,
    pub n_out: usize,
    /// `n_out` rows of `n_in` entries.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

/// Per-layer activations recorded by a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    spec: NetSpec,
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }

    pub fn into_output(mut self) -> Vec<f64> {
        self.activations.pop().unwrap()
    }
}

impl FlatParams {
    pub fn new(spec: NetSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                what: "flat parameter vector",
                expected: spec.param_count(),
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "flat parameter vector",
                index,
            });
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: NetSpec) -> Self {
        let values = vec![0.0; spec.param_count()];
        Self { spec, values }
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for optimizers. Callers keep entries finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let n_in = self.spec.layer_sizes[l];
        let n_out = self.spec.layer_sizes[l + 1];
        let off = self.spec.offset(l);
        let (weights, rest) = self.values[off..].split_at(n_in * n_out);
        LayerView {
            n_in,
            n_out,
            weights,
            bias: &rest[..n_out],
        }
    }

    /// Splits into per-layer `(weights, bias)` pairs.
    pub fn to_layers(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..self.spec.depth())
            .map(|l| {
                let v = self.layer(l);
                (v.weights.to_vec(), v.bias.to_vec())
            })
            .collect()
    }

    /// Inverse of [`FlatParams::to_layers`].
    pub fn from_layers(spec: NetSpec, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        if layers.len() != spec.depth() {
            return Err(Error::DimensionMismatch {
                what: "layer list",
                expected: spec.depth(),
                actual: layers.len(),
            });
        }
        let mut values = Vec::with_capacity(spec.param_count());
        for (w, b) in layers {
            values.extend_from_slice(w);
            values.extend_from_slice(b);
        }
        Self::new(spec, values)
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.spec.input_size() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.spec.input_size(),
                actual: input.len(),
            });
        }
        Ok(())
    }

    /// Output only; no cache is kept.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for l in 0..self.spec.depth() {
            let layer = self.layer(l);
            let act = self.spec.activation(l);
            current = layer
                .weights
                .chunks_exact(layer.n_in)
                .zip(layer.bias)
                .map(|(row, &b)| act.apply(dot(row, &current) + b))
                .collect();
        }
        Ok(current)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        self.check_input(input)?;
        let depth = self.spec.depth();
        let mut activations = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        activations.push(input.to_vec());
        for l in 0..depth {
            let layer = self.layer(l);
            let act = self.spec.activation(l);
            let z: Vec<f64> = layer
                .weights
                .chunks_exact(layer.n_in)
                .zip(layer.bias)
                .map(|(row, &b)| dot(row, &activations[l]) + b)
                .collect();
            activations.push(z.iter().map(|&x| act.apply(x)).collect());
            pre.push(z);
        }
        Ok(ForwardCache {
            spec: self.spec.clone(),
            activations,
            pre,
        })
    }

    /// Returns `(d loss / d params, d loss / d input)` for the upstream
    /// gradient `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grad = vec![0.0; self.values.len()];
        let input_grad = self.backward_accumulate(cache, upstream, &mut grad)?;
        Ok((grad, input_grad))
    }

    /// Adds the parameter gradient into `grad` and returns the input gradient.
    pub fn backward_accumulate(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        if cache.spec != self.spec {
            return Err(Error::StaleCache);
        }
        if upstream.len() != self.spec.output_size() {
            return Err(Error::DimensionMismatch {
                what: "upstream gradient",
                expected: self.spec.output_size(),
                actual: upstream.len(),
            });
        }
        if grad.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient accumulator",
                expected: self.values.len(),
                actual: grad.len(),
            });
        }
        let mut delta: Vec<f64> = upstream.to_vec();
        for l in (0..self.spec.depth()).rev() {
            let act = self.spec.activation(l);
            for ((d, &z), &a) in delta.iter_mut().zip(&cache.pre[l]).zip(&cache.activations[l + 1]) {
                *d *= act.derivative(z, a);
            }
            let layer = self.layer(l);
            let input = &cache.activations[l];
            let off = self.spec.offset(l);
            let (gw, rest) = grad[off..].split_at_mut(layer.n_in * layer.n_out);
            for ((g_row, gb), &d) in gw.chunks_exact_mut(layer.n_in).zip(rest.iter_mut()).zip(&delta) {
                if d != 0.0 {
                    for (g, &x) in g_row.iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
                *gb += d;
            }
            let mut next = vec![0.0; layer.n_in];
            for (row, &d) in layer.weights.chunks_exact(layer.n_in).zip(&delta) {
                if d != 0.0 {
                    for (n, &w) in next.iter_mut().zip(row) {
                        *n += d * w;
                    }
                }
            }
            delta = next;
        }
        Ok(delta)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean squared error and its gradient `2 (pred - target) / n`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            what: "mse target",
            expected: pred.len(),
            actual: target.len(),
        });
    }
    let n = pred.len().max(1) as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam moments for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
            config,
        }
    }

    /// One update. A gradient with any non-finite entry leaves both the
    /// parameters and the state untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                what: "adam update",
                expected: self.m.len(),
                actual: if params.len() != self.m.len() { params.len() } else { grad.len() },
            });
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite { what: "gradient", index });
        }
        let AdamConfig { alpha, beta1, beta2, eps } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(beta1, t as f64);
        let bc2 = 1.0 - libm::pow(beta2, t as f64);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= alpha * m_hat / (libm::sqrt(v_hat) + eps);
        }
        Ok(())
    }
}
