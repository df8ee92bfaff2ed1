use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::array::softmax_into;
use super::{ParamSet, RealArray, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Softmax,
}

/// Shape and nonlinearity of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub output_activation: OutputActivation,
}

impl MlpConfig {
    pub fn new(
        layer_sizes: Vec<usize>,
        activation: Activation,
        output_activation: OutputActivation,
    ) -> Result<Self, TensorError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(TensorError::InvalidConfig(format!(
                "need at least two positive layer sizes, got {layer_sizes:?}"
            )));
        }
        Ok(Self {
            layer_sizes,
            activation,
            output_activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn weight_name(layer: usize) -> String {
        format!("l{layer}.weight")
    }

    pub fn bias_name(layer: usize) -> String {
        format!("l{layer}.bias")
    }

    /// Checks that `params` holds exactly the weights and biases this
    /// configuration expects, in order.
    pub fn validate_params(&self, params: &ParamSet) -> Result<(), TensorError> {
        self.check_shapes(params)?;
        for (layer, pair) in params.entries().chunks(2).enumerate() {
            let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            let (wn, w) = &pair[0];
            let (bn, b) = &pair[1];
            if *wn != Self::weight_name(layer)
                || *bn != Self::bias_name(layer)
                || w.shape() != [fan_in, fan_out]
                || b.shape() != [fan_out]
            {
                return Err(TensorError::LayoutMismatch);
            }
        }
        Ok(())
    }

    /// Shape-only variant of [`MlpConfig::validate_params`] for hot paths.
    pub(crate) fn check_shapes(&self, params: &ParamSet) -> Result<(), TensorError> {
        if params.len() != 2 * self.num_layers() {
            return Err(TensorError::LayoutMismatch);
        }
        let ok = params.entries().chunks(2).enumerate().all(|(layer, pair)| {
            let (fan_in, fan_out) = (self.layer_sizes[layer], self.layer_sizes[layer + 1]);
            pair[0].1.shape() == [fan_in, fan_out] && pair[1].1.shape() == [fan_out]
        });
        if ok {
            Ok(())
        } else {
            Err(TensorError::LayoutMismatch)
        }
    }
}

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
pub fn mlp_init(config: &MlpConfig, seed: u64) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new("mlp-v1");
    for layer in 0..config.num_layers() {
        let (fan_in, fan_out) = (config.layer_sizes[layer], config.layer_sizes[layer + 1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let w = RealArray::new(vec![fan_in, fan_out], data).expect("finite init");
        params.push(MlpConfig::weight_name(layer), w).unwrap();
        params
            .push(MlpConfig::bias_name(layer), RealArray::zeros(vec![fan_out]))
            .unwrap();
    }
    params
}

/// Sets the last layer's weights and biases to zero.
pub fn zero_output_layer(params: &mut ParamSet) {
    let n = params.len();
    for a in params.arrays_mut().skip(n.saturating_sub(2)) {
        a.fill(0.0);
    }
}

/// Per-layer record of a forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    /// `inputs[l]` is the input to layer `l` (post-activation of layer `l-1`).
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of the output layer.
    logits: Vec<f64>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Output-layer values before the output activation.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

/// Which quantity an upstream gradient is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradWrt {
    /// Gradient w.r.t. the network output (after the output activation).
    Output,
    /// Gradient w.r.t. the output layer's pre-activation; skips the output
    /// activation's Jacobian. Used for log-softmax losses on policy heads.
    Logits,
}

pub fn mlp_forward(
    params: &ParamSet,
    config: &MlpConfig,
    input: &RealArray,
) -> Result<(RealArray, ForwardCache), TensorError> {
    if input.shape() != [config.input_size()] {
        return Err(TensorError::ShapeMismatch {
            expected: vec![config.input_size()],
            found: input.shape().to_vec(),
        });
    }
    config.validate_params(params)?;
    let cache = forward_unchecked(params, config, input.data());
    let out = RealArray::new(vec![config.output_size()], cache.output.clone())?;
    Ok((out, cache))
}

/// Forward pass on a raw slice. `params` must already match `config`.
pub(crate) fn forward_unchecked(params: &ParamSet, config: &MlpConfig, input: &[f64]) -> ForwardCache {
    debug_assert_eq!(input.len(), config.input_size());
    let entries = params.entries();
    let n_layers = config.num_layers();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut current = input.to_vec();
    for layer in 0..n_layers {
        let fan_out = config.layer_sizes[layer + 1];
        let w = entries[2 * layer].1.data();
        let b = entries[2 * layer + 1].1.data();
        let mut z = b.to_vec();
        for (i, &x) in current.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &w[i * fan_out..(i + 1) * fan_out];
            for (zj, wij) in z.iter_mut().zip(row) {
                *zj += x * wij;
            }
        }
        inputs.push(current);
        if layer + 1 < n_layers {
            match config.activation {
                Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
                Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            }
            current = z;
        } else {
            let output = match config.output_activation {
                OutputActivation::Identity => z.clone(),
                OutputActivation::Softmax => {
                    let mut p = vec![0.0; z.len()];
                    softmax_into(&z, &mut p);
                    p
                }
            };
            return ForwardCache {
                layer_sizes: config.layer_sizes.clone(),
                inputs,
                logits: z,
                output,
            };
        }
    }
    unreachable!("config has at least one layer")
}

pub fn mlp_backward(
    params: &ParamSet,
    config: &MlpConfig,
    cache: &ForwardCache,
    output_grad: &RealArray,
) -> Result<ParamSet, TensorError> {
    let mut grads = params.zeros_like();
    accumulate_backward(params, config, cache, output_grad.data(), GradWrt::Output, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `scale * d(loss)/d(params)` into `grads`.
pub fn accumulate_backward(
    params: &ParamSet,
    config: &MlpConfig,
    cache: &ForwardCache,
    upstream: &[f64],
    wrt: GradWrt,
    scale: f64,
    grads: &mut ParamSet,
) -> Result<(), TensorError> {
    if cache.layer_sizes != config.layer_sizes {
        return Err(TensorError::CacheMismatch);
    }
    if upstream.len() != config.output_size() {
        return Err(TensorError::ShapeMismatch {
            expected: vec![config.output_size()],
            found: vec![upstream.len()],
        });
    }
    config.check_shapes(params)?;
    config.check_shapes(grads)?;

    let mut delta: Vec<f64> = match (wrt, config.output_activation) {
        (GradWrt::Logits, _) | (GradWrt::Output, OutputActivation::Identity) => {
            upstream.iter().map(|g| g * scale).collect()
        }
        (GradWrt::Output, OutputActivation::Softmax) => {
            let p = &cache.output;
            let dot: f64 = upstream.iter().zip(p).map(|(g, p)| g * p).sum();
            upstream
                .iter()
                .zip(p)
                .map(|(g, p)| scale * p * (g - dot))
                .collect()
        }
    };

    let entries = params.entries();
    let n_layers = config.num_layers();
    for layer in (0..n_layers).rev() {
        let fan_in = config.layer_sizes[layer];
        let fan_out = config.layer_sizes[layer + 1];
        let x = &cache.inputs[layer];
        {
            let mut arrays = grads.arrays_mut().skip(2 * layer);
            let gw = arrays.next().unwrap().data_mut();
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut gw[i * fan_out..(i + 1) * fan_out];
                for (g, d) in row.iter_mut().zip(&delta) {
                    *g += xi * d;
                }
            }
            let gb = arrays.next().unwrap().data_mut();
            for (g, d) in gb.iter_mut().zip(&delta) {
                *g += d;
            }
        }
        if layer == 0 {
            break;
        }
        let w = entries[2 * layer].1.data();
        let mut prev = vec![0.0; fan_in];
        for (i, p) in prev.iter_mut().enumerate() {
            let row = &w[i * fan_out..(i + 1) * fan_out];
            *p = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
        }
        // x is the post-activation of the hidden layer below.
        match config.activation {
            Activation::Tanh => {
                for (p, a) in prev.iter_mut().zip(x) {
                    *p *= 1.0 - a * a;
                }
            }
            Activation::Relu => {
                for (p, a) in prev.iter_mut().zip(x) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        delta = prev;
    }
    Ok(())
}
