//! SGD with classical momentum.
//!
//! Update rule: `v ← momentum·v − lr·g; p ← p + v`. An optional per-layer
//! learning-rate multiplier mirrors the common trick of training the final
//! randomly initialized layer faster than the rest.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, Mlp};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Per-layer learning-rate multipliers; `None` means 1.0 everywhere.
    pub lr_multipliers: Option<Vec<f64>>,
    pub max_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            lr_multipliers: None,
            max_iterations: 20_000,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self, num_layers: usize) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be a positive real".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        if let Some(mults) = &self.lr_multipliers {
            if mults.len() != num_layers {
                return Err(Error::Config(format!(
                    "{} lr multipliers for {} layers",
                    mults.len(),
                    num_layers
                )));
            }
        }
        Ok(())
    }
}

/// Velocity buffers and the iteration counter of one training run.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    velocity_w: Vec<Array2<f64>>,
    velocity_b: Vec<Array1<f64>>,
    pub iteration: usize,
}

impl OptimizerState {
    pub fn new(model: &Mlp) -> Self {
        Self {
            velocity_w: model
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weight.raw_dim()))
                .collect(),
            velocity_b: model
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.raw_dim()))
                .collect(),
            iteration: 0,
        }
    }
}

/// One momentum-SGD step over every parameter block. Aborts without touching
/// any parameter if a gradient block contains a non-finite value.
pub fn sgd_step(
    model: &mut Mlp,
    grads: &Gradients,
    cfg: &OptimizerConfig,
    state: &mut OptimizerState,
) -> Result<()> {
    cfg.validate(model.num_layers())?;
    if grads.weights.len() != model.num_layers() || grads.biases.len() != model.num_layers() {
        return Err(Error::ShapeMismatch(format!(
            "gradients cover {} layers, model has {}",
            grads.weights.len(),
            model.num_layers()
        )));
    }
    for (idx, (gw, gb)) in grads.weights.iter().zip(&grads.biases).enumerate() {
        if gw.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: format!("layer {idx} weight"),
            });
        }
        if gb.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                block: format!("layer {idx} bias"),
            });
        }
    }
    for idx in 0..model.num_layers() {
        let mult = cfg
            .lr_multipliers
            .as_ref()
            .map(|m| m[idx])
            .unwrap_or(1.0);
        let lr = cfg.learning_rate * mult;
        let vw = &mut state.velocity_w[idx];
        *vw *= cfg.momentum;
        *vw -= &(&grads.weights[idx] * lr);
        model.layers[idx].weight += &*vw;

        let vb = &mut state.velocity_b[idx];
        *vb *= cfg.momentum;
        *vb -= &(&grads.biases[idx] * lr);
        model.layers[idx].bias += &*vb;
    }
    state.iteration += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, MlpSpec};
    use ndarray::{array, Array1, Array2};

    fn scalar_model(p: f64) -> Mlp {
        let spec = MlpSpec {
            layer_widths: vec![1, 1],
            activations: vec![Activation::Identity],
            init_seed: 0,
            init_scale: None,
        };
        Mlp::from_parts(spec, vec![array![[p]]], vec![Array1::zeros(1)]).unwrap()
    }

    fn unit_grads(g: f64) -> Gradients {
        Gradients {
            weights: vec![array![[g]]],
            biases: vec![Array1::zeros(1)],
            input: Array2::zeros((1, 1)),
        }
    }

    #[test]
    fn plain_sgd_step() {
        let mut model = scalar_model(0.0);
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            ..Default::default()
        };
        let mut state = OptimizerState::new(&model);
        sgd_step(&mut model, &unit_grads(1.0), &cfg, &mut state).unwrap();
        assert!((model.weight(0)[[0, 0]] + 0.1).abs() < 1e-15);
        assert_eq!(state.iteration, 1);
    }

    #[test]
    fn momentum_two_steps() {
        // v1 = -0.1, p = -0.1; v2 = 0.9*(-0.1) - 0.1 = -0.19, p = -0.29
        let mut model = scalar_model(0.0);
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            ..Default::default()
        };
        let mut state = OptimizerState::new(&model);
        sgd_step(&mut model, &unit_grads(1.0), &cfg, &mut state).unwrap();
        sgd_step(&mut model, &unit_grads(1.0), &cfg, &mut state).unwrap();
        assert!((model.weight(0)[[0, 0]] + 0.29).abs() < 1e-12);
    }

    #[test]
    fn zero_gradients_decay_velocity() {
        let mut model = scalar_model(1.0);
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.5,
            ..Default::default()
        };
        let mut state = OptimizerState::new(&model);
        sgd_step(&mut model, &unit_grads(1.0), &cfg, &mut state).unwrap();
        let p1 = model.weight(0)[[0, 0]];
        sgd_step(&mut model, &unit_grads(0.0), &cfg, &mut state).unwrap();
        // Second step moves by momentum * previous velocity only.
        assert!((model.weight(0)[[0, 0]] - (p1 + 0.5 * -0.1)).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut model = scalar_model(0.5);
        let cfg = OptimizerConfig::default();
        let mut state = OptimizerState::new(&model);
        let err = sgd_step(&mut model, &unit_grads(f64::NAN), &cfg, &mut state).unwrap_err();
        assert!(err.to_string().contains("layer 0 weight"));
        assert_eq!(model.weight(0)[[0, 0]], 0.5);
    }

    #[test]
    fn lr_multiplier_scales_layer() {
        let mut model = scalar_model(0.0);
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            momentum: 0.0,
            lr_multipliers: Some(vec![10.0]),
            ..Default::default()
        };
        let mut state = OptimizerState::new(&model);
        sgd_step(&mut model, &unit_grads(1.0), &cfg, &mut state).unwrap();
        assert!((model.weight(0)[[0, 0]] + 1.0).abs() < 1e-12);
    }
}
