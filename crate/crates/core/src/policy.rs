//! Categorical actor and state-value critic, GAE, and the actor-critic loss.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{
    accumulate_backward, forward_unchecked, mlp_init, zero_output_layer, Activation, GradWrt, MlpConfig,
    OutputActivation, ParamSet, TensorError,
};

const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("state has {found} components, policy expects {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("non-finite policy output at state {state:?}")]
    NonFiniteOutput { state: Vec<f64> },
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("batch is empty or misaligned")]
    BadBatch,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Affine map applied to raw states before they enter the networks:
/// `(s - offset) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsScale {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ObsScale {
    pub fn identity(dim: usize) -> Self {
        Self {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(&self.offset)
            .zip(&self.scale)
            .map(|((v, o), k)| (v - o) / k)
            .collect()
    }
}

/// Separate policy and value networks. Both output layers start at zero,
/// so a fresh model acts uniformly at random and values every state at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub policy_config: MlpConfig,
    pub policy_params: ParamSet,
    pub value_config: MlpConfig,
    pub value_params: ParamSet,
    pub obs: ObsScale,
}

/// Output of [`ActorCritic::act`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActSample {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

impl ActorCritic {
    pub fn new(obs: ObsScale, num_actions: usize, hidden: &[usize], seed: u64) -> Result<Self, PolicyError> {
        let dim = obs.offset.len();
        let sizes = |out: usize| {
            let mut v = vec![dim];
            v.extend_from_slice(hidden);
            v.push(out);
            v
        };
        let policy_config = MlpConfig::new(sizes(num_actions), Activation::Tanh, OutputActivation::Softmax)?;
        let value_config = MlpConfig::new(sizes(1), Activation::Tanh, OutputActivation::Identity)?;
        let mut policy_params = mlp_init(&policy_config, seed);
        let mut value_params = mlp_init(&value_config, seed.wrapping_add(1));
        zero_output_layer(&mut policy_params);
        zero_output_layer(&mut value_params);
        Ok(Self {
            policy_config,
            policy_params,
            value_config,
            value_params,
            obs,
        })
    }

    /// Checks that stored parameters match the configs.
    pub fn validate(&self) -> Result<(), PolicyError> {
        self.policy_config.validate_params(&self.policy_params)?;
        self.value_config.validate_params(&self.value_params)?;
        if self.obs.offset.len() != self.state_dim()
            || self.obs.scale.len() != self.state_dim()
            || self.value_config.input_size() != self.state_dim()
            || self.value_config.output_size() != 1
        {
            return Err(TensorError::InvalidConfig("actor-critic sizes disagree".into()).into());
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.policy_config.input_size()
    }

    pub fn num_actions(&self) -> usize {
        self.policy_config.output_size()
    }

    fn input(&self, state: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if state.len() != self.state_dim() {
            return Err(PolicyError::StateLength {
                expected: self.state_dim(),
                found: state.len(),
            });
        }
        Ok(self.obs.apply(state))
    }

    /// Action probabilities at `state`.
    pub fn probabilities(&self, state: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let x = self.input(state)?;
        let cache = forward_unchecked(&self.policy_params, &self.policy_config, &x);
        if cache.logits().iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteOutput { state: state.to_vec() });
        }
        Ok(cache.output().to_vec())
    }

    /// Log-probabilities at `state`, computed stably from the logits.
    pub fn log_probabilities(&self, state: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let x = self.input(state)?;
        let cache = forward_unchecked(&self.policy_params, &self.policy_config, &x);
        if cache.logits().iter().any(|v| !v.is_finite()) {
            return Err(PolicyError::NonFiniteOutput { state: state.to_vec() });
        }
        Ok(crate::tensor::log_softmax(cache.logits()))
    }

    pub fn value(&self, state: &[f64]) -> Result<f64, PolicyError> {
        let x = self.input(state)?;
        let v = forward_unchecked(&self.value_params, &self.value_config, &x).output()[0];
        if !v.is_finite() {
            return Err(PolicyError::NonFiniteOutput { state: state.to_vec() });
        }
        Ok(v)
    }

    /// Samples an action from the policy.
    pub fn act(&self, state: &[f64], rng: &mut impl Rng) -> Result<ActSample, PolicyError> {
        let logp = self.log_probabilities(state)?;
        let action = sample_categorical(&logp, rng.gen::<f64>());
        Ok(ActSample {
            action,
            log_prob: logp[action],
            value: self.value(state)?,
        })
    }

    /// Most probable action; ties go to the lowest index.
    pub fn greedy(&self, state: &[f64]) -> Result<usize, PolicyError> {
        let p = self.log_probabilities(state)?;
        Ok(argmax(&p))
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF draw from a categorical distribution given log-probabilities
/// and a uniform `u` in [0, 1).
fn sample_categorical(logp: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    // rounding left `u` above the accumulated mass: take the last action
    // with non-zero probability
    logp.iter().rposition(|lp| lp.exp() > 0.0).unwrap_or(logp.len() - 1)
}

/// Generalized advantage estimates for one time-ordered segment.
/// `bootstrap_value` is V of the state after the last step, used only if
/// that step is not terminal.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lam: f64,
    bootstrap_value: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "misaligned segment");
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap_value;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lam * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Centers advantages and divides by their standard deviation; the division
/// is skipped when the spread is below 1e-8.
pub fn standardize(advantages: &[f64]) -> Vec<f64> {
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let div = if std < STD_FLOOR { 1.0 } else { std };
    advantages.iter().map(|a| (a - mean) / div).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossCoefs {
    pub value: f64,
    pub entropy: f64,
}

impl Default for LossCoefs {
    fn default() -> Self {
        Self {
            value: 0.5,
            entropy: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    /// Total: policy term + value term - entropy bonus.
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Gradients of the actor-critic loss, one set per network.
#[derive(Debug, Clone, PartialEq)]
pub struct AcGrads {
    pub policy: ParamSet,
    pub value: ParamSet,
}

/// Actor-critic loss over a batch:
/// `-mean(log pi(a|s) * adv) + c_v * mean((V(s) - ret)^2) - c_e * mean(H(pi(.|s)))`.
/// `advantages` are used as given; standardize them beforehand if desired.
pub fn policy_value_loss(
    model: &ActorCritic,
    states: &[&[f64]],
    actions: &[usize],
    advantages: &[f64],
    returns: &[f64],
    coefs: LossCoefs,
) -> Result<(LossReport, AcGrads), PolicyError> {
    let mut grads = AcGrads {
        policy: model.policy_params.zeros_like(),
        value: model.value_params.zeros_like(),
    };
    let report = accumulate_policy_value_loss(model, states, actions, advantages, returns, coefs, 1.0, &mut grads)?;
    Ok((report, grads))
}

/// Adds `scale` times the loss gradient into `grads`.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_policy_value_loss(
    model: &ActorCritic,
    states: &[&[f64]],
    actions: &[usize],
    advantages: &[f64],
    returns: &[f64],
    coefs: LossCoefs,
    scale: f64,
    grads: &mut AcGrads,
) -> Result<LossReport, PolicyError> {
    let n = states.len();
    if n == 0 || actions.len() != n || advantages.len() != n || returns.len() != n {
        return Err(PolicyError::BadBatch);
    }
    let k = model.num_actions();
    if actions.iter().any(|&a| a >= k) {
        return Err(PolicyError::BadBatch);
    }
    let inv_n = 1.0 / n as f64;
    let mut report = LossReport::default();
    let mut g_logits = vec![0.0; k];
    for i in 0..n {
        let x = model.input(states[i])?;
        let pc = forward_unchecked(&model.policy_params, &model.policy_config, &x);
        let logp = crate::tensor::log_softmax(pc.logits());
        let p = pc.output();
        let entropy: f64 = -p.iter().zip(&logp).map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 }).sum::<f64>();
        let a = actions[i];
        let adv = advantages[i];
        report.policy -= logp[a] * adv * inv_n;
        report.entropy += entropy * inv_n;

        // d/dz of [-adv * log p_a - c_e * H]
        for j in 0..k {
            let onehot = if j == a { 1.0 } else { 0.0 };
            let d_logp = onehot - p[j];
            let d_entropy = if p[j] > 0.0 { -p[j] * (logp[j] + entropy) } else { 0.0 };
            g_logits[j] = (-adv * d_logp - coefs.entropy * d_entropy) * inv_n;
        }
        if scale != 0.0 {
            accumulate_backward(
                &model.policy_params,
                &model.policy_config,
                &pc,
                &g_logits,
                GradWrt::Logits,
                scale,
                &mut grads.policy,
            )?;
        }

        let vc = forward_unchecked(&model.value_params, &model.value_config, &x);
        let err = vc.output()[0] - returns[i];
        report.value += err * err * inv_n;
        if scale != 0.0 {
            let g = [2.0 * coefs.value * err * inv_n];
            accumulate_backward(
                &model.value_params,
                &model.value_config,
                &vc,
                &g,
                GradWrt::Output,
                scale,
                &mut grads.value,
            )?;
        }
    }
    report.total = report.policy + coefs.value * report.value - coefs.entropy * report.entropy;
    if !report.total.is_finite() {
        return Err(PolicyError::NonFiniteLoss);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(actions: usize) -> ActorCritic {
        ActorCritic::new(ObsScale::identity(3), actions, &[6], 5).unwrap()
    }

    #[test]
    fn fresh_model_is_uniform_with_zero_value() {
        let m = model(5);
        let p = m.probabilities(&[1.0, -2.0, 0.5]).unwrap();
        assert!(p.iter().all(|x| (x - 0.2).abs() < 1e-15));
        assert_eq!(m.value(&[1.0, -2.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let m = model(5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n {
            let s = m.act(&[0.1, 0.2, 0.3], &mut rng).unwrap();
            assert!((s.log_prob - 0.2f64.ln()).abs() < 1e-12);
            counts[s.action] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01);
        }
    }

    #[test]
    fn peaked_logits_pick_first_action() {
        let mut m = ActorCritic::new(ObsScale::identity(1), 2, &[2], 0).unwrap();
        // output bias -> logits [10, -10]
        let n = m.policy_params.len();
        let b = m.policy_params.arrays_mut().nth(n - 1).unwrap();
        b.data_mut().copy_from_slice(&[10.0, -10.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zeros = (0..10_000).filter(|_| m.act(&[0.0], &mut rng).unwrap().action == 0).count();
        assert!(zeros as f64 / 10_000.0 > 0.999);
        let lp = m.log_probabilities(&[0.0]).unwrap();
        let p = crate::tensor::softmax(&[10.0, -10.0]).unwrap();
        assert_eq!(lp[1], p[1].ln());
        assert_eq!(m.greedy(&[0.0]).unwrap(), 0);
    }

    #[test]
    fn gae_base_cases() {
        let (a, r) = gae_advantages(&[2.0], &[0.5], &[true], 0.9, 0.3, 100.0);
        assert_eq!(a, vec![1.5]);
        assert_eq!(r, vec![2.0]);
        let rewards = [1.0, 0.0, 2.0];
        let values = [0.3, 0.1, -0.4];
        let (a, _) = gae_advantages(&rewards, &values, &[false; 3], 0.9, 0.0, 0.7);
        let deltas = [1.0 + 0.9 * 0.1 - 0.3, 0.9 * -0.4 - 0.1, 2.0 + 0.9 * 0.7 + 0.4];
        assert_eq!(a, deltas.to_vec());
    }

    #[test]
    fn gae_two_step_example() {
        let (a, _) = gae_advantages(&[1.0, 1.0], &[0.5, 0.5], &[false, true], 0.9, 0.95, 0.0);
        assert!((a[1] - 0.5).abs() < 1e-15);
        assert!((a[0] - 1.3775).abs() < 1e-12);
    }

    #[test]
    fn standardize_guards_constant_input() {
        assert_eq!(standardize(&[0.5, 0.5, 0.5]), vec![0.0; 3]);
        let z = standardize(&[1.0, 2.0, 3.0, 4.0]);
        let mean: f64 = z.iter().sum::<f64>() / 4.0;
        let var: f64 = z.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_entropy_is_log_k() {
        let m = model(5);
        let s = [0.0, 0.0, 0.0];
        let (r, _) = policy_value_loss(&m, &[&s], &[0], &[0.0], &[0.0], LossCoefs::default()).unwrap();
        assert!((r.entropy - 5f64.ln()).abs() < 1e-12);
        assert_eq!(r.policy, 0.0);
    }

    #[test]
    fn zero_advantages_leave_only_entropy_and_value() {
        let mut m = model(3);
        let n = m.policy_params.len();
        m.policy_params.arrays_mut().nth(n - 2).unwrap().fill(0.3);
        let states = [[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]];
        let refs: Vec<&[f64]> = states.iter().map(|s| &s[..]).collect();
        let coefs = LossCoefs { value: 0.5, entropy: 0.0 };
        let (r, g) = policy_value_loss(&m, &refs, &[0, 2], &[0.0, 0.0], &[0.0, 0.0], coefs).unwrap();
        assert_eq!(r.policy, 0.0);
        assert_eq!(g.policy.max_abs(), 0.0);
    }

    #[test]
    fn misaligned_batch_rejected() {
        let m = model(3);
        let s = [0.0; 3];
        assert_eq!(
            policy_value_loss(&m, &[&s], &[0, 1], &[0.0], &[0.0], LossCoefs::default()).map(|_| ()),
            Err(PolicyError::BadBatch)
        );
        assert_eq!(
            policy_value_loss(&m, &[&s], &[3], &[0.0], &[0.0], LossCoefs::default()).map(|_| ()),
            Err(PolicyError::BadBatch)
        );
    }
}
