//! Learned one-step dynamics model.
//!
//! The model is a point predictor trained with squared error, so it
//! converges toward the conditional mean of the next state. States are
//! standardized by running statistics on the way in and de-standardized on
//! the way out; actions enter as a one-hot vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{
    accumulate_backward, forward_unchecked, mlp_init, zero_output_layer, Activation, GradWrt, MlpConfig,
    Optimizer, OutputActivation, ParamSet, TensorError,
};

const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("state has {found} components, model expects {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("non-finite input state")]
    NonFiniteState,
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite forward-model loss")]
    NonFiniteLoss,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-component running mean and standard deviation (Welford).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, m2), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *m2 += d * (v - *m);
        }
    }

    /// Population standard deviation, floored; 1 until two samples are seen.
    pub fn std(&self, i: usize) -> f64 {
        if self.count < 2 {
            1.0
        } else {
            (self.m2[i] / self.count as f64).sqrt().max(STD_FLOOR)
        }
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend(x.iter().enumerate().map(|(i, v)| (v - self.mean[i]) / self.std(i)));
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().enumerate().map(|(i, v)| v * self.std(i) + self.mean[i]).collect()
    }
}

/// One `(s, a, s')` training example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub state: &'a [f64],
    pub action: usize,
    pub next_state: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    config: MlpConfig,
    params: ParamSet,
    norm: RunningNorm,
    state_dim: usize,
    num_actions: usize,
}

impl ForwardModel {
    /// A model with the given hidden layers and a zeroed output layer, so it
    /// initially predicts the running mean.
    pub fn new(state_dim: usize, num_actions: usize, hidden: &[usize], seed: u64) -> Result<Self, ModelError> {
        let mut sizes = vec![state_dim + num_actions];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let config = MlpConfig::new(sizes, Activation::Tanh, OutputActivation::Identity)?;
        let mut params = mlp_init(&config, seed);
        zero_output_layer(&mut params);
        Ok(Self {
            config,
            params,
            norm: RunningNorm::new(state_dim),
            state_dim,
            num_actions,
        })
    }

    /// Rebuilds a model from stored parts.
    pub fn from_parts(config: MlpConfig, params: ParamSet, norm: RunningNorm, num_actions: usize) -> Result<Self, ModelError> {
        config.validate_params(&params)?;
        let state_dim = config.output_size();
        if config.input_size() != state_dim + num_actions || norm.mean.len() != state_dim {
            return Err(TensorError::InvalidConfig("forward model sizes disagree".into()).into());
        }
        Ok(Self {
            config,
            params,
            norm,
            state_dim,
            num_actions,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn normalizer(&self) -> &RunningNorm {
        &self.norm
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Folds states into the running statistics.
    pub fn observe_states<'a>(&mut self, states: impl IntoIterator<Item = &'a [f64]>) {
        for s in states {
            self.norm.update(s);
        }
    }

    fn input(&self, state: &[f64], action: usize) -> Result<Vec<f64>, ModelError> {
        if state.len() != self.state_dim {
            return Err(ModelError::StateLength {
                expected: self.state_dim,
                found: state.len(),
            });
        }
        if action >= self.num_actions {
            return Err(ModelError::InvalidAction {
                action,
                count: self.num_actions,
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        let mut x = Vec::with_capacity(self.config.input_size());
        self.norm.normalize_into(state, &mut x);
        x.extend((0..self.num_actions).map(|a| if a == action { 1.0 } else { 0.0 }));
        Ok(x)
    }

    /// Point prediction of the next state, in state units.
    pub fn predict(&self, state: &[f64], action: usize) -> Result<Vec<f64>, ModelError> {
        let x = self.input(state, action)?;
        let cache = forward_unchecked(&self.params, &self.config, &x);
        Ok(self.norm.denormalize(cache.output()))
    }

    /// Mean over the batch of the squared error between the standardized
    /// prediction and the standardized target, and its gradient.
    pub fn loss(&self, batch: &[Sample]) -> Result<(f64, ParamSet), ModelError> {
        let mut grads = self.params.zeros_like();
        let loss = self.accumulate_loss(batch, 1.0, &mut grads)?;
        Ok((loss, grads))
    }

    /// Adds `scale * d(loss)/d(params)` into `grads` and returns the loss.
    pub fn accumulate_loss(&self, batch: &[Sample], scale: f64, grads: &mut ParamSet) -> Result<f64, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut target = Vec::with_capacity(self.state_dim);
        let mut upstream = vec![0.0; self.state_dim];
        for s in batch {
            let x = self.input(s.state, s.action)?;
            if s.next_state.len() != self.state_dim {
                return Err(ModelError::StateLength {
                    expected: self.state_dim,
                    found: s.next_state.len(),
                });
            }
            target.clear();
            self.norm.normalize_into(s.next_state, &mut target);
            let cache = forward_unchecked(&self.params, &self.config, &x);
            for ((u, y), t) in upstream.iter_mut().zip(cache.output()).zip(&target) {
                let e = y - t;
                total += e * e;
                *u = 2.0 * e / n;
            }
            if scale != 0.0 {
                accumulate_backward(&self.params, &self.config, &cache, &upstream, GradWrt::Output, scale, grads)?;
            }
        }
        let loss = total / n;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss);
        }
        Ok(loss)
    }

    /// One optimizer step on the model parameters. Returns the batch loss
    /// before the step.
    pub fn fit_step(&mut self, optimizer: &mut Optimizer, batch: &[Sample], learning_rate: f64) -> Result<f64, ModelError> {
        let (loss, grads) = self.loss(batch)?;
        optimizer.step(&mut self.params, &grads, learning_rate)?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{OptimizerKind, RealArray};

    #[test]
    fn zero_output_predicts_running_mean() {
        let mut m = ForwardModel::new(2, 5, &[8, 8], 0).unwrap();
        assert_eq!(m.predict(&[3.0, 4.0], 2).unwrap(), vec![0.0, 0.0]);
        m.observe_states([&[1.0, 10.0][..], &[3.0, 14.0][..]]);
        let p = m.predict(&[7.0, -2.0], 4).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn running_norm_matches_direct_statistics() {
        let mut n = RunningNorm::new(1);
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        for x in xs {
            n.update(&[x]);
        }
        assert!((n.mean()[0] - 5.0).abs() < 1e-12);
        assert!((n.std(0) - 2.0).abs() < 1e-12);
        let mut c = RunningNorm::new(1);
        c.update(&[3.0]);
        c.update(&[3.0]);
        assert_eq!(c.std(0), STD_FLOOR);
    }

    #[test]
    fn scalar_loss_example() {
        let mut m = ForwardModel::new(1, 1, &[3], 0).unwrap();
        // force f(s, a) = 0.3 through the output bias
        let n = m.params.len();
        let bias = m.params.arrays_mut().nth(n - 1).unwrap();
        *bias = RealArray::from_vec(vec![0.3]).unwrap();
        let (loss, _) = m
            .loss(&[Sample {
                state: &[1.0],
                action: 0,
                next_state: &[0.5],
            }])
            .unwrap();
        assert!((loss - 0.04).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_has_zero_loss_and_gradient() {
        let m = ForwardModel::new(2, 3, &[4], 0).unwrap();
        // untrained model predicts 0 in standardized units
        let batch = [Sample {
            state: &[1.0, 2.0],
            action: 1,
            next_state: &[0.0, 0.0],
        }];
        let (loss, grads) = m.loss(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn actions_change_predictions() {
        let mut m = ForwardModel::new(2, 2, &[4], 3).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, m.params());
        let batch = [Sample {
            state: &[0.0, 0.0],
            action: 0,
            next_state: &[1.0, 1.0],
        }];
        m.fit_step(&mut opt, &batch, 0.1).unwrap();
        assert_ne!(m.predict(&[0.5, 0.5], 0).unwrap(), m.predict(&[0.5, 0.5], 1).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = ForwardModel::new(2, 2, &[4], 0).unwrap();
        assert_eq!(m.predict(&[f64::NAN, 0.0], 0), Err(ModelError::NonFiniteState));
        assert!(matches!(m.predict(&[0.0], 0), Err(ModelError::StateLength { .. })));
        assert!(matches!(m.predict(&[0.0, 0.0], 2), Err(ModelError::InvalidAction { .. })));
        assert_eq!(m.loss(&[]).map(|_| ()), Err(ModelError::EmptyBatch));
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut m = ForwardModel::new(2, 2, &[4], 0).unwrap();
        let before = m.params().clone();
        let mut opt = Optimizer::new(OptimizerKind::Adam, m.params());
        let batch = [Sample {
            state: &[0.3, 0.1],
            action: 1,
            next_state: &[1.0, -1.0],
        }];
        m.fit_step(&mut opt, &batch, 0.0).unwrap();
        assert_eq!(m.params(), &before);
    }
}
