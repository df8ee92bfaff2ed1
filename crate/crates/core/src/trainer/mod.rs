//! The training loop: roll out the policy, predict each next state with the
//! forward model, score the constraint on the prediction, add the result to
//! the environment reward, and take one joint gradient step on
//! `lambda * actor-critic loss + beta * forward-model loss`.

mod bundle;
mod eval;

pub use bundle::{read_bundle, Bundle};
pub use eval::{evaluate_policy, EvalReport, Selection};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{bind, parse, BoundFormula, DslError};
use crate::env::{EnvError, EnvInstance, EnvKind, EnvSpec, Environment};
use crate::forward_model::{ForwardModel, ModelError, Sample};
use crate::policy::{
    accumulate_policy_value_loss, gae_advantages, standardize, AcGrads, ActorCritic, LossCoefs, ObsScale,
    PolicyError,
};
use crate::tensor::{Optimizer, OptimizerKind, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("constraint: {0}")]
    Constraint(#[from] DslError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("iteration {iteration}: {detail}")]
    NonFinite { iteration: u64, detail: String },
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
}

/// Hyperparameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct System3Config {
    /// Weight of the actor-critic loss in the joint objective.
    pub lambda: f64,
    /// Weight of the forward-model loss, in [0, 1].
    pub beta: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub learning_rate: f64,
    /// Steps per environment instance per iteration.
    pub rollout_length: usize,
    /// Environment instances stepped in lockstep.
    pub batch_size: usize,
    pub total_steps: u64,
    pub constraint_reward_weight: f64,
    pub use_env_reward: bool,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub hidden: Vec<usize>,
    pub model_hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    /// Iterations at the start during which only the forward model trains.
    pub warmup_iterations: u64,
}

impl Default for System3Config {
    fn default() -> Self {
        Self {
            lambda: 0.15,
            beta: 0.3,
            gamma: 0.99,
            gae_lambda: 0.95,
            learning_rate: 1e-3,
            rollout_length: 100,
            batch_size: 20,
            total_steps: 1_000_000,
            constraint_reward_weight: 1.0,
            use_env_reward: true,
            value_coef: 0.5,
            entropy_coef: 0.01,
            hidden: vec![64, 64],
            model_hidden: vec![64, 64],
            optimizer: OptimizerKind::Adam,
            warmup_iterations: 0,
        }
    }
}

impl System3Config {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::Config(msg.to_string()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if !unit(self.beta) {
            return bad("beta must lie in [0, 1]");
        }
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return bad("gamma and gae_lambda must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.rollout_length == 0 || self.batch_size == 0 {
            return bad("rollout_length and batch_size must be at least 1");
        }
        if !self.constraint_reward_weight.is_finite() || !self.value_coef.is_finite() || !self.entropy_coef.is_finite()
        {
            return bad("coefficients must be finite");
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return bad("value_coef and entropy_coef must be non-negative");
        }
        if self.hidden.contains(&0) || self.model_hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }

    pub fn steps_per_iteration(&self) -> u64 {
        (self.rollout_length * self.batch_size) as u64
    }
}

/// `weight` if the formula holds on the model's prediction of the next
/// state, else 0.
pub fn constraint_reward(
    formula: &BoundFormula,
    model: &ForwardModel,
    state: &[f64],
    action: usize,
    weight: f64,
) -> Result<f64, TrainError> {
    let predicted = model.predict(state, action)?;
    Ok(if formula.evaluate(&predicted)? { weight } else { 0.0 })
}

pub fn compose_reward(env_reward: f64, constraint_reward: f64, use_env_reward: bool) -> f64 {
    if use_env_reward {
        env_reward + constraint_reward
    } else {
        constraint_reward
    }
}

/// Network input scaling suited to each environment.
pub fn default_obs_scale(spec: &EnvSpec) -> ObsScale {
    match &spec.kind {
        EnvKind::Grid { layout, .. } => {
            let hx = (layout.width() as f64 - 1.0).max(1.0) / 2.0;
            let hy = (layout.height() as f64 - 1.0).max(1.0) / 2.0;
            ObsScale {
                offset: vec![hx, hy],
                scale: vec![hx, hy],
            }
        }
        EnvKind::CartPole => ObsScale {
            offset: vec![0.0; 4],
            scale: vec![2.4, 2.0, 0.2095, 2.0],
        },
    }
}

/// Summary of one training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: u64,
    /// Environment steps taken so far, including this iteration.
    pub steps: u64,
    /// Mean environment return of episodes that finished this iteration.
    pub mean_episode_return: Option<f64>,
    pub episodes: usize,
    /// Fraction of steps that earned the constraint reward.
    pub constraint_reward_rate: f64,
    /// Fraction of steps whose true next state satisfies the constraint.
    pub satisfaction_rate: f64,
    /// Fraction of steps where the constraint's verdict on the predicted
    /// and the true next state differ.
    pub disagreement_rate: f64,
    pub forward_loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

/// Complete, resumable training state for one seed.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: System3Config,
    env_spec: EnvSpec,
    seed: u64,
    eval_seed: u64,
    constraint_src: Option<String>,
    constraint: Option<BoundFormula>,
    envs: Vec<EnvInstance>,
    states: Vec<Vec<f64>>,
    episode_returns: Vec<f64>,
    model: ActorCritic,
    forward: ForwardModel,
    opt_policy: Optimizer,
    opt_value: Optimizer,
    opt_forward: Optimizer,
    rng: ChaCha8Rng,
    iteration: u64,
    steps: u64,
}

/// Parses and binds constraint source against an environment.
pub fn bind_constraint(src: &str, env: &impl Environment) -> Result<BoundFormula, TrainError> {
    Ok(bind(&parse(src)?, &env.registry(), env.schema())?)
}

impl Trainer {
    /// Fresh training state. `constraint` is formula source text; `None`
    /// trains on environment reward alone.
    pub fn new(config: System3Config, env_spec: EnvSpec, constraint: Option<&str>, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let policy_seed: u64 = master.gen();
        let forward_seed: u64 = master.gen();
        let action_seed: u64 = master.gen();
        let eval_seed: u64 = master.gen();
        let mut envs = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            envs.push(env_spec.build(master.gen())?);
        }
        let probe = &envs[0];
        let constraint_bound = constraint.map(|src| bind_constraint(src, probe)).transpose()?;
        let state_dim = probe.schema().len();
        let num_actions = probe.action_spec().count();
        let model = ActorCritic::new(default_obs_scale(&env_spec), num_actions, &config.hidden, policy_seed)?;
        let forward = ForwardModel::new(state_dim, num_actions, &config.model_hidden, forward_seed)?;
        let states = envs.iter_mut().map(|e| e.reset()).collect();
        Ok(Self {
            opt_policy: Optimizer::new(config.optimizer, &model.policy_params),
            opt_value: Optimizer::new(config.optimizer, &model.value_params),
            opt_forward: Optimizer::new(config.optimizer, forward.params()),
            episode_returns: vec![0.0; envs.len()],
            config,
            env_spec,
            seed,
            eval_seed,
            constraint_src: constraint.map(str::to_string),
            constraint: constraint_bound,
            envs,
            states,
            model,
            forward,
            rng: ChaCha8Rng::seed_from_u64(action_seed),
            iteration: 0,
            steps: 0,
        })
    }

    pub fn config(&self) -> &System3Config {
        &self.config
    }

    pub fn env_spec(&self) -> &EnvSpec {
        &self.env_spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn eval_seed(&self) -> u64 {
        self.eval_seed
    }

    pub fn constraint_source(&self) -> Option<&str> {
        self.constraint_src.as_deref()
    }

    pub fn constraint(&self) -> Option<&BoundFormula> {
        self.constraint.as_ref()
    }

    pub fn model(&self) -> &ActorCritic {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut ActorCritic {
        &mut self.model
    }

    pub fn forward_model(&self) -> &ForwardModel {
        &self.forward
    }

    pub fn forward_model_mut(&mut self) -> &mut ForwardModel {
        &mut self.forward
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_finished(&self) -> bool {
        self.steps >= self.config.total_steps
    }

    /// Greedy evaluation on a fresh, unwrapped environment seeded with the
    /// run's evaluation seed.
    pub fn evaluate(
        &self,
        formula: Option<&BoundFormula>,
        goal: Option<&BoundFormula>,
        eval_steps: usize,
    ) -> Result<EvalReport, TrainError> {
        let mut env = self.env_spec.build_base(self.eval_seed);
        evaluate_policy(&self.model, &mut env, formula, goal, eval_steps, Selection::Greedy)
    }

    /// Collects one batch of rollouts and applies one joint update.
    pub fn train_iteration(&mut self) -> Result<IterationMetrics, TrainError> {
        let n_env = self.envs.len();
        let horizon = self.config.rollout_length;
        let total = n_env * horizon;
        let weight = self.config.constraint_reward_weight;

        // per env, time-ordered
        let mut seg_states: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(horizon); n_env];
        let mut seg_next: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(horizon); n_env];
        let mut seg_actions: Vec<Vec<usize>> = vec![Vec::with_capacity(horizon); n_env];
        let mut seg_values: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon); n_env];
        let mut seg_rewards: Vec<Vec<f64>> = vec![Vec::with_capacity(horizon); n_env];
        let mut seg_dones: Vec<Vec<bool>> = vec![Vec::with_capacity(horizon); n_env];

        let mut completed = Vec::new();
        let (mut rewarded, mut satisfied, mut disagree) = (0usize, 0usize, 0usize);
        for _ in 0..horizon {
            for e in 0..n_env {
                let s = std::mem::take(&mut self.states[e]);
                let act = self.model.act(&s, &mut self.rng)?;
                let step = self.envs[e].step(act.action)?;
                let (r_c, holds_true) = match &self.constraint {
                    Some(f) => {
                        let predicted = self.forward.predict(&s, act.action)?;
                        let holds_pred = f.evaluate(&predicted)?;
                        let holds_true = f.evaluate(&step.next_state)?;
                        disagree += usize::from(holds_pred != holds_true);
                        (if holds_pred { weight } else { 0.0 }, holds_true)
                    }
                    None => (0.0, true),
                };
                rewarded += usize::from(r_c != 0.0);
                satisfied += usize::from(holds_true);
                let r = compose_reward(step.reward, r_c, self.config.use_env_reward);
                if !r.is_finite() {
                    return Err(TrainError::NonFinite {
                        iteration: self.iteration,
                        detail: format!("reward {r} at state {s:?}"),
                    });
                }
                self.episode_returns[e] += step.reward;
                seg_states[e].push(s);
                seg_actions[e].push(act.action);
                seg_values[e].push(act.value);
                seg_rewards[e].push(r);
                seg_dones[e].push(step.done);
                if step.done {
                    completed.push(std::mem::take(&mut self.episode_returns[e]));
                    self.states[e] = self.envs[e].reset();
                } else {
                    self.states[e] = step.next_state.clone();
                }
                seg_next[e].push(step.next_state);
            }
        }

        let mut advantages = Vec::with_capacity(total);
        let mut returns = Vec::with_capacity(total);
        for e in 0..n_env {
            let last_done = *seg_dones[e].last().expect("horizon >= 1");
            let bootstrap = if last_done { 0.0 } else { self.model.value(&self.states[e])? };
            let (a, r) = gae_advantages(
                &seg_rewards[e],
                &seg_values[e],
                &seg_dones[e],
                self.config.gamma,
                self.config.gae_lambda,
                bootstrap,
            );
            advantages.extend(a);
            returns.extend(r);
        }
        let advantages = standardize(&advantages);
        let states: Vec<&[f64]> = seg_states.iter().flatten().map(Vec::as_slice).collect();
        let next: Vec<&[f64]> = seg_next.iter().flatten().map(Vec::as_slice).collect();
        let actions: Vec<usize> = seg_actions.concat();

        self.forward.observe_states(states.iter().chain(&next).copied());
        let samples: Vec<Sample> = (0..total)
            .map(|i| Sample {
                state: states[i],
                action: actions[i],
                next_state: next[i],
            })
            .collect();
        let mut fwd_grads = self.forward.params().zeros_like();
        let forward_loss = self.forward.accumulate_loss(&samples, self.config.beta, &mut fwd_grads)?;

        let train_policy = self.config.lambda > 0.0 && self.iteration >= self.config.warmup_iterations;
        let mut ac_grads = AcGrads {
            policy: self.model.policy_params.zeros_like(),
            value: self.model.value_params.zeros_like(),
        };
        let coefs = LossCoefs {
            value: self.config.value_coef,
            entropy: self.config.entropy_coef,
        };
        let scale = if train_policy { self.config.lambda } else { 0.0 };
        let report = accumulate_policy_value_loss(
            &self.model,
            &states,
            &actions,
            &advantages,
            &returns,
            coefs,
            scale,
            &mut ac_grads,
        )?;

        for (name, g) in [("policy", &ac_grads.policy), ("value", &ac_grads.value), ("forward", &fwd_grads)] {
            if let Err(e) = g.check_finite() {
                return Err(TrainError::NonFinite {
                    iteration: self.iteration,
                    detail: format!("{name} gradient: {e}"),
                });
            }
        }
        let lr = self.config.learning_rate;
        if train_policy {
            self.opt_policy.step(&mut self.model.policy_params, &ac_grads.policy, lr)?;
            self.opt_value.step(&mut self.model.value_params, &ac_grads.value, lr)?;
        }
        if self.config.beta > 0.0 {
            self.opt_forward.step(self.forward.params_mut(), &fwd_grads, lr)?;
        }

        self.iteration += 1;
        self.steps += total as u64;
        let frac = |k: usize| k as f64 / total as f64;
        Ok(IterationMetrics {
            iteration: self.iteration,
            steps: self.steps,
            mean_episode_return: if completed.is_empty() {
                None
            } else {
                Some(completed.iter().sum::<f64>() / completed.len() as f64)
            },
            episodes: completed.len(),
            constraint_reward_rate: frac(rewarded),
            satisfaction_rate: frac(satisfied),
            disagreement_rate: frac(disagree),
            forward_loss,
            policy_loss: report.policy,
            value_loss: report.value,
            entropy: report.entropy,
        })
    }
}
