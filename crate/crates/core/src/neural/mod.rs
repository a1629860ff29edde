//! Minimal dense feed-forward networks with explicit reverse-mode gradients.
//!
//! Everything here is plain `f64` on the heap: no autodiff framework, no
//! hidden state. The building-model rollout and the actor/critic updates
//! both need exact parameter and input gradients, so `mlp_gradients`
//! returns both. Batched variants for the training hot path live in
//! [`batch`].

mod adam;
pub mod batch;

pub use adam::{adam_step, AdamConfig, OptimizerState};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Tanh,
}

/// Network architecture: layer sizes (input, hidden..., output) and
/// activations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            hidden_activation,
            output_activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Conventional shape used across the crate: ReLU hidden layers.
    pub fn relu(layer_sizes: Vec<usize>, output_activation: OutputActivation) -> Result<Self> {
        Self::new(layer_sizes, HiddenActivation::Relu, output_activation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "network needs at least input and output sizes, got {:?}",
                self.layer_sizes
            )));
        }
        if let Some(bad) = self.layer_sizes.iter().find(|&&s| s < 1) {
            return Err(Error::InvalidConfig(format!(
                "layer size must be >= 1, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// One dense layer: weights row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn weight_row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// Full parameter set of a network, together with its architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub layers: Vec<LayerParams>,
}

/// Gradient (or moment) buffers shaped like an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub layers: Vec<LayerParams>,
}

impl MlpGradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerParams::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            for w in &mut l.weights {
                *w *= factor;
            }
            for b in &mut l.bias {
                *b *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &MlpGradients) {
        for (a, b) in self.layers.iter_mut().zip(other.layers.iter()) {
            for (x, y) in a.weights.iter_mut().zip(b.weights.iter()) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(b.bias.iter()) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|w| w.is_finite()) && l.bias.iter().all(|b| b.is_finite()))
    }
}

impl MlpParams {
    pub fn shapes_match(&self, grads: &MlpGradients) -> bool {
        self.layers.len() == grads.layers.len()
            && self
                .layers
                .iter()
                .zip(grads.layers.iter())
                .all(|(p, g)| p.in_dim == g.in_dim && p.out_dim == g.out_dim)
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }
}

/// Initialize parameters for `spec`: weights uniform in `[-s, s]` with
/// `s = sqrt(6 / (fan_in + fan_out))`, biases zero. Deterministic per seed.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> Result<MlpParams> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.n_layers());
    for w in spec.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-s, s);
        let mut layer = LayerParams::zeros(fan_in, fan_out);
        for wij in &mut layer.weights {
            *wij = dist.sample(&mut rng);
        }
        layers.push(layer);
    }
    Ok(MlpParams {
        spec: spec.clone(),
        layers,
    })
}

#[inline]
fn activate(hidden: HiddenActivation, z: f64) -> f64 {
    match hidden {
        HiddenActivation::Relu => {
            if z > 0.0 {
                z
            } else {
                0.0
            }
        }
        HiddenActivation::Tanh => z.tanh(),
    }
}

#[inline]
fn activate_deriv(hidden: HiddenActivation, z: f64) -> f64 {
    match hidden {
        HiddenActivation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        HiddenActivation::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
    }
}

#[inline]
fn activate_output(out: OutputActivation, z: f64) -> f64 {
    match out {
        OutputActivation::Identity => z,
        OutputActivation::Tanh => z.tanh(),
    }
}

#[inline]
fn activate_output_deriv(out: OutputActivation, z: f64) -> f64 {
    match out {
        OutputActivation::Identity => 1.0,
        OutputActivation::Tanh => {
            let t = z.tanh();
            1.0 - t * t
        }
    }
}

fn check_input_dim(params: &MlpParams, input: &[f64]) -> Result<()> {
    if input.len() != params.spec.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "input has length {}, network expects {}",
            input.len(),
            params.spec.input_dim()
        )));
    }
    Ok(())
}

/// Forward pass on a single input vector.
pub fn mlp_forward(params: &MlpParams, input: &[f64]) -> Result<Vec<f64>> {
    check_input_dim(params, input)?;
    let n_layers = params.layers.len();
    let mut act = input.to_vec();
    for (li, layer) in params.layers.iter().enumerate() {
        let last = li == n_layers - 1;
        let mut next = vec![0.0; layer.out_dim];
        for (o, n) in next.iter_mut().enumerate() {
            let z = crate::linalg::dot(layer.weight_row(o), &act) + layer.bias[o];
            *n = if last {
                activate_output(params.spec.output_activation, z)
            } else {
                activate(params.spec.hidden_activation, z)
            };
        }
        act = next;
    }
    Ok(act)
}

/// Reverse-mode gradients of the scalar `upstream . output` with respect to
/// all parameters and to the input.
///
/// Returns `(parameter gradients, input gradient)`.
pub fn mlp_gradients(
    params: &MlpParams,
    input: &[f64],
    upstream: &[f64],
) -> Result<(MlpGradients, Vec<f64>)> {
    check_input_dim(params, input)?;
    if upstream.len() != params.spec.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "upstream has length {}, network output is {}",
            upstream.len(),
            params.spec.output_dim()
        )));
    }

    let n_layers = params.layers.len();
    // Forward, keeping activations and pre-activations.
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    acts.push(input.to_vec());
    for (li, layer) in params.layers.iter().enumerate() {
        let last = li == n_layers - 1;
        let prev = &acts[li];
        let mut z = vec![0.0; layer.out_dim];
        for (o, zo) in z.iter_mut().enumerate() {
            *zo = crate::linalg::dot(layer.weight_row(o), prev) + layer.bias[o];
        }
        let a = z
            .iter()
            .map(|&zo| {
                if last {
                    activate_output(params.spec.output_activation, zo)
                } else {
                    activate(params.spec.hidden_activation, zo)
                }
            })
            .collect();
        zs.push(z);
        acts.push(a);
    }

    // Backward.
    let mut grads = MlpGradients::zeros_like(params);
    let mut delta: Vec<f64> = upstream
        .iter()
        .zip(zs[n_layers - 1].iter())
        .map(|(&u, &z)| u * activate_output_deriv(params.spec.output_activation, z))
        .collect();

    for li in (0..n_layers).rev() {
        let layer = &params.layers[li];
        let prev = &acts[li];
        let g = &mut grads.layers[li];
        for (o, &d) in delta.iter().enumerate() {
            g.bias[o] = d;
            let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (w, &p) in row.iter_mut().zip(prev.iter()) {
                *w = d * p;
            }
        }
        // Propagate to the previous layer (or to the input).
        let mut prev_delta = vec![0.0; layer.in_dim];
        for (o, &d) in delta.iter().enumerate() {
            crate::linalg::axpy(d, layer.weight_row(o), &mut prev_delta);
        }
        if li > 0 {
            for (pd, &z) in prev_delta.iter_mut().zip(zs[li - 1].iter()) {
                *pd *= activate_deriv(params.spec.hidden_activation, z);
            }
        }
        delta = prev_delta;
    }

    Ok((grads, delta))
}

/// Save parameters as JSON. Uses shortest-round-trip float formatting, so
/// load returns bit-identical values.
pub fn save_mlp_json(path: &std::path::Path, params: &MlpParams) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(std::io::BufWriter::new(file), params)?;
    Ok(())
}

pub fn load_mlp_json(path: &std::path::Path) -> Result<MlpParams> {
    let file = std::fs::File::open(path)?;
    let params: MlpParams = serde_json::from_reader(std::io::BufReader::new(file))?;
    validate_params(&params)?;
    Ok(params)
}

fn validate_params(params: &MlpParams) -> Result<()> {
    params.spec.validate()?;
    if params.layers.len() != params.spec.n_layers() {
        return Err(Error::Data(format!(
            "checkpoint has {} layers, spec expects {}",
            params.layers.len(),
            params.spec.n_layers()
        )));
    }
    for (li, (layer, w)) in params
        .layers
        .iter()
        .zip(params.spec.layer_sizes.windows(2))
        .enumerate()
    {
        if layer.in_dim != w[0]
            || layer.out_dim != w[1]
            || layer.weights.len() != w[0] * w[1]
            || layer.bias.len() != w[1]
        {
            return Err(Error::Data(format!("checkpoint layer {li} shape mismatch")));
        }
        if !layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("checkpoint layer {li}")));
        }
    }
    Ok(())
}
