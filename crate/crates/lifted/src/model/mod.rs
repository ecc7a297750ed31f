//! A small feed-forward embedding network with exact backpropagation.
//!
//! The network realizes the embedding function `f(·)` at desk scale: a stack
//! of affine layers with per-layer activations. Forward caches enough to run
//! exact reverse-mode backprop of any loss through both the parameters and
//! the inputs.

mod checkpoint;
mod gradcheck;
mod optimizer;

pub use gradcheck::{
    gradient_check, random_check_instance, BlockReport, GradCheckConfig, GradCheckReport,
    GradCheckStatus,
};
pub use optimizer::{sgd_step, OptimizerConfig, OptimizerState};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative as a function of the pre-activation value.
    fn derivative(&self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Config(format!(
                "unknown activation `{other}` (expected relu, tanh, identity)"
            ))),
        }
    }
}

/// Architecture and initialization recipe of the embedding network.
///
/// `layer_widths` runs input dimension → hidden widths → embedding dimension;
/// `activations` has one entry per affine layer (the last is usually
/// `identity`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub init_seed: u64,
    /// Half-width of the uniform init interval; `None` uses `1/sqrt(fan_in)`
    /// per layer.
    pub init_scale: Option<f64>,
}

impl MlpSpec {
    /// Spec with ReLU hidden layers and an identity output layer.
    pub fn relu_net(layer_widths: Vec<usize>, init_seed: u64) -> Self {
        let n_layers = layer_widths.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n_layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        Self {
            layer_widths,
            activations,
            init_seed,
            init_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config(
                "layer_widths must list at least an input and output width".into(),
            ));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config("all layer widths must be >= 1".into()));
        }
        if self.activations.len() != self.layer_widths.len() - 1 {
            return Err(Error::Config(format!(
                "expected {} activations for {} widths, got {}",
                self.layer_widths.len() - 1,
                self.layer_widths.len(),
                self.activations.len()
            )));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Config("init_scale must be a positive real".into()));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Layer {
    /// `out x in`, row-major.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// The embedding network: spec plus concrete parameters.
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    pub(crate) layers: Vec<Layer>,
}

/// Activations cached by a forward pass, sufficient for exact backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation values of each layer.
    pre_activations: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

/// Gradients with respect to every parameter block plus the network input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl Mlp {
    /// Initializes parameters uniformly in `[-s, s]` with `s = init_scale`
    /// or `1/sqrt(fan_in)` per layer, from the spec's seed.
    pub fn init(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let mut layers = Vec::new();
        for (idx, win) in spec.layer_widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (win[0], win[1]);
            let scale = spec
                .init_scale
                .unwrap_or_else(|| 1.0 / (fan_in as f64).sqrt());
            let weight =
                Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-scale..scale));
            let bias = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-scale..scale));
            layers.push(Layer {
                weight,
                bias,
                activation: spec.activations[idx],
            });
        }
        Ok(Self { spec, layers })
    }

    /// Builds a network from explicit parameter blocks (used by the
    /// checkpoint loader and tests).
    pub fn from_parts(
        spec: MlpSpec,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = spec.layer_widths.len() - 1;
        if weights.len() != n || biases.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} weight/bias blocks, got {}/{}",
                weights.len(),
                biases.len()
            )));
        }
        let mut layers = Vec::new();
        for (idx, (weight, bias)) in weights.into_iter().zip(biases).enumerate() {
            let (fan_in, fan_out) = (spec.layer_widths[idx], spec.layer_widths[idx + 1]);
            if weight.dim() != (fan_out, fan_in) || bias.len() != fan_out {
                return Err(Error::ShapeMismatch(format!(
                    "layer {idx}: expected weight {fan_out}x{fan_in}, bias {fan_out}"
                )));
            }
            layers.push(Layer {
                weight,
                bias,
                activation: spec.activations[idx],
            });
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn weight(&self, layer: usize) -> &Array2<f64> {
        &self.layers[layer].weight
    }

    pub fn bias(&self, layer: usize) -> &Array1<f64> {
        &self.layers[layer].bias
    }

    /// Forward pass over `n` rows, caching per-layer activations.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<ForwardCache> {
        if inputs.ncols() != self.spec.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} does not match network input dimension {}",
                inputs.ncols(),
                self.spec.input_dim()
            )));
        }
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
            output: Array2::zeros((0, 0)),
        };
        let mut current = inputs.clone();
        for layer in &self.layers {
            let pre = current.dot(&layer.weight.t()) + &layer.bias;
            let post = pre.mapv(|v| layer.activation.apply(v));
            cache.inputs.push(current);
            cache.pre_activations.push(pre);
            current = post;
        }
        cache.output = current;
        Ok(cache)
    }

    /// Convenience forward that discards the cache.
    pub fn embed(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(inputs)?.output)
    }

    /// Exact reverse-mode gradients of the scalar objective whose gradient
    /// with respect to the network output is `upstream` (n x c).
    pub fn backward(&self, cache: &ForwardCache, upstream: &Array2<f64>) -> Result<Gradients> {
        let last_pre = cache
            .pre_activations
            .last()
            .ok_or_else(|| Error::InvalidInput("empty forward cache".into()))?;
        if upstream.dim() != last_pre.dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient is {:?}, network output is {:?}",
                upstream.dim(),
                last_pre.dim()
            )));
        }
        let mut weights = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut biases = vec![Array1::zeros(0); self.layers.len()];
        let mut delta = upstream.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre_activations[idx];
            let act_grad = pre.mapv(|v| layer.activation.derivative(v));
            let delta_pre = &delta * &act_grad;
            weights[idx] = delta_pre.t().dot(&cache.inputs[idx]);
            biases[idx] = delta_pre.sum_axis(ndarray::Axis(0));
            delta = delta_pre.dot(&layer.weight);
        }
        Ok(Gradients {
            weights,
            biases,
            input: delta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_parameters_give_zero_embeddings() {
        let spec = MlpSpec {
            layer_widths: vec![3, 2],
            activations: vec![Activation::Identity],
            init_seed: 0,
            init_scale: None,
        };
        let mlp = Mlp::from_parts(
            spec,
            vec![Array2::zeros((2, 3))],
            vec![Array1::zeros(2)],
        )
        .unwrap();
        let out = mlp.embed(&array![[1.0, 2.0, 3.0]]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_passes_through() {
        let spec = MlpSpec {
            layer_widths: vec![2, 2],
            activations: vec![Activation::Identity],
            init_seed: 0,
            init_scale: None,
        };
        let mlp = Mlp::from_parts(spec, vec![Array2::eye(2)], vec![Array1::zeros(2)]).unwrap();
        let x = array![[0.5, -1.5], [2.0, 0.0]];
        let out = mlp.embed(&x).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn forward_matches_scalar_loop() {
        use rand::{Rng, SeedableRng};
        let spec = MlpSpec::relu_net(vec![4, 5, 3], 99);
        let mlp = Mlp::init(spec).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-2.0..2.0));
        let fast = mlp.embed(&x).unwrap();

        // Scalar-loop reimplementation.
        for r in 0..6 {
            let mut cur: Vec<f64> = (0..4).map(|c| x[[r, c]]).collect();
            for layer in &mlp.layers {
                let mut next = vec![0.0; layer.bias.len()];
                for (o, slot) in next.iter_mut().enumerate() {
                    let mut acc = layer.bias[o];
                    for (i, v) in cur.iter().enumerate() {
                        acc += layer.weight[[o, i]] * v;
                    }
                    *slot = layer.activation.apply(acc);
                }
                cur = next;
            }
            for (c, v) in cur.iter().enumerate() {
                assert!((fast[[r, c]] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = MlpSpec::relu_net(vec![3, 4, 2], 5);
        let a = Mlp::init(spec.clone()).unwrap();
        let b = Mlp::init(spec).unwrap();
        let x = array![[0.1, 0.2, 0.3]];
        let ea = a.embed(&x).unwrap();
        let eb = b.embed(&x).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn zero_upstream_gives_zero_parameter_grads() {
        let spec = MlpSpec::relu_net(vec![3, 4, 2], 1);
        let mlp = Mlp::init(spec).unwrap();
        let x = array![[1.0, -1.0, 0.5], [0.2, 0.4, -0.3]];
        let cache = mlp.forward(&x).unwrap();
        let grads = mlp.backward(&cache, &Array2::zeros((2, 2))).unwrap();
        assert!(grads.weights.iter().all(|w| w.iter().all(|&g| g == 0.0)));
        assert!(grads.biases.iter().all(|b| b.iter().all(|&g| g == 0.0)));
        assert!(grads.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn identity_network_input_grads_equal_upstream() {
        let spec = MlpSpec {
            layer_widths: vec![2, 2],
            activations: vec![Activation::Identity],
            init_seed: 0,
            init_scale: None,
        };
        let mlp = Mlp::from_parts(spec, vec![Array2::eye(2)], vec![Array1::zeros(2)]).unwrap();
        let x = array![[0.5, -1.5]];
        let cache = mlp.forward(&x).unwrap();
        let upstream = array![[0.3, -0.7]];
        let grads = mlp.backward(&cache, &upstream).unwrap();
        assert_eq!(grads.input, upstream);
    }

    #[test]
    fn rejects_width_mismatch() {
        let spec = MlpSpec::relu_net(vec![3, 2], 1);
        let mlp = Mlp::init(spec).unwrap();
        assert!(mlp.embed(&array![[1.0, 2.0]]).is_err());
    }
}
