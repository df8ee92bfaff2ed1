//! Checkpoint bundles.
//!
//! ```text
//! system3-checkpoint v1
//! meta {"config": ..., "env_spec": ..., "rng": ..., ...}
//! paramset v1
//! ...            # pi.*, vf.*, fwd.* and optimizer moments
//! ```
//!
//! The metadata line is JSON with exact float round-tripping; together with
//! the parameter block it restores a trainer that continues bit-identically.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{bind_constraint, System3Config, TrainError, Trainer};
use crate::dsl::BoundFormula;
use crate::env::{EnvInstance, EnvSpec};
use crate::forward_model::{ForwardModel, RunningNorm};
use crate::policy::{ActorCritic, ObsScale};
use crate::tensor::checkpoint::{read_params, write_params};
use crate::tensor::{Adam, MlpConfig, Optimizer, ParamSet};

const MAGIC: &str = "system3-checkpoint v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum OptMeta {
    Sgd,
    Adam { t: u64, beta1: f64, beta2: f64, eps: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    config: System3Config,
    env_spec: EnvSpec,
    seed: u64,
    eval_seed: u64,
    constraint: Option<String>,
    iteration: u64,
    steps: u64,
    rng: ChaCha8Rng,
    envs: Vec<EnvInstance>,
    states: Vec<Vec<f64>>,
    episode_returns: Vec<f64>,
    policy_config: MlpConfig,
    value_config: MlpConfig,
    forward_config: MlpConfig,
    obs: ObsScale,
    forward_norm: RunningNorm,
    num_actions: usize,
    optimizers: Vec<OptMeta>,
}

/// The evaluation-relevant part of a checkpoint.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub config: System3Config,
    pub env_spec: EnvSpec,
    pub seed: u64,
    pub eval_seed: u64,
    pub constraint: Option<String>,
    pub iteration: u64,
    pub steps: u64,
    pub model: ActorCritic,
    pub forward: ForwardModel,
}

fn err(line: usize, msg: impl Into<String>) -> TrainError {
    TrainError::Checkpoint { line, msg: msg.into() }
}

fn append(into: &mut ParamSet, from: &ParamSet, prefix: &str) {
    for (name, a) in from.with_prefix(prefix).entries() {
        into.push(name.clone(), a.clone()).expect("prefixes keep names unique");
    }
}

const OPT_PREFIXES: [&str; 3] = ["opt.pi.", "opt.vf.", "opt.fwd."];

impl Trainer {
    /// Serializes the full training state.
    pub fn save(&self) -> String {
        let mut params = ParamSet::new("system3-bundle");
        append(&mut params, &self.model.policy_params, "pi.");
        append(&mut params, &self.model.value_params, "vf.");
        append(&mut params, self.forward.params(), "fwd.");
        let mut optimizers = Vec::new();
        for (opt, prefix) in [&self.opt_policy, &self.opt_value, &self.opt_forward].into_iter().zip(OPT_PREFIXES) {
            optimizers.push(match opt {
                Optimizer::Sgd => OptMeta::Sgd,
                Optimizer::Adam(a) => {
                    append(&mut params, &a.m, &format!("{prefix}m."));
                    append(&mut params, &a.v, &format!("{prefix}v."));
                    OptMeta::Adam {
                        t: a.t,
                        beta1: a.beta1,
                        beta2: a.beta2,
                        eps: a.eps,
                    }
                }
            });
        }
        let meta = Meta {
            config: self.config.clone(),
            env_spec: self.env_spec.clone(),
            seed: self.seed,
            eval_seed: self.eval_seed,
            constraint: self.constraint_src.clone(),
            iteration: self.iteration,
            steps: self.steps,
            rng: self.rng.clone(),
            envs: self.envs.clone(),
            states: self.states.clone(),
            episode_returns: self.episode_returns.clone(),
            policy_config: self.model.policy_config.clone(),
            value_config: self.model.value_config.clone(),
            forward_config: self.forward.config().clone(),
            obs: self.model.obs.clone(),
            forward_norm: self.forward.normalizer().clone(),
            num_actions: self.forward.num_actions(),
            optimizers,
        };
        let json = serde_json::to_string(&meta).expect("checkpoint metadata serializes");
        format!("{MAGIC}\nmeta {json}\n{}", write_params(&params, None))
    }

    /// Restores a trainer saved with [`Trainer::save`].
    pub fn restore(text: &str) -> Result<Trainer, TrainError> {
        let (meta, params) = parse(text)?;
        let (model, forward) = networks(&meta, &params)?;
        let mut opts = Vec::new();
        for ((om, prefix), p) in meta
            .optimizers
            .iter()
            .zip(OPT_PREFIXES)
            .zip([&model.policy_params, &model.value_params, forward.params()])
        {
            opts.push(match om {
                OptMeta::Sgd => Optimizer::Sgd,
                OptMeta::Adam { t, beta1, beta2, eps } => {
                    let m = params.strip_prefix(&format!("{prefix}m."));
                    let v = params.strip_prefix(&format!("{prefix}v."));
                    if !m.same_layout(p) || !v.same_layout(p) {
                        return Err(err(0, format!("optimizer moments `{prefix}` do not match parameters")));
                    }
                    Optimizer::Adam(Adam {
                        beta1: *beta1,
                        beta2: *beta2,
                        eps: *eps,
                        m,
                        v,
                        t: *t,
                    })
                }
            });
        }
        if opts.len() != 3 || meta.envs.is_empty() || meta.states.len() != meta.envs.len() {
            return Err(err(2, "inconsistent trainer state"));
        }
        let constraint = match &meta.constraint {
            Some(src) => Some(bind_constraint(src, &meta.envs[0])?),
            None => None,
        };
        let mut opts = opts.into_iter();
        Ok(Trainer {
            config: meta.config,
            env_spec: meta.env_spec,
            seed: meta.seed,
            eval_seed: meta.eval_seed,
            constraint_src: meta.constraint,
            constraint,
            envs: meta.envs,
            states: meta.states,
            episode_returns: meta.episode_returns,
            model,
            forward,
            opt_policy: opts.next().unwrap(),
            opt_value: opts.next().unwrap(),
            opt_forward: opts.next().unwrap(),
            rng: meta.rng,
            iteration: meta.iteration,
            steps: meta.steps,
        })
    }
}

fn parse(text: &str) -> Result<(Meta, ParamSet), TrainError> {
    let mut lines = text.splitn(3, '\n');
    if lines.next().map(str::trim) != Some(MAGIC) {
        return Err(err(1, format!("expected `{MAGIC}`")));
    }
    let meta_line = lines.next().ok_or_else(|| err(2, "missing metadata"))?;
    let json = meta_line.strip_prefix("meta ").ok_or_else(|| err(2, "expected `meta <json>`"))?;
    let meta: Meta = serde_json::from_str(json).map_err(|e| err(2, e.to_string()))?;
    let rest = lines.next().ok_or_else(|| err(3, "missing parameters"))?;
    let (params, _, _) = read_params(rest).map_err(|e| match e {
        crate::tensor::TensorError::Format { line, msg } => err(line + 2, msg),
        other => err(3, other.to_string()),
    })?;
    Ok((meta, params))
}

fn networks(meta: &Meta, params: &ParamSet) -> Result<(ActorCritic, ForwardModel), TrainError> {
    let model = ActorCritic {
        policy_config: meta.policy_config.clone(),
        policy_params: params.strip_prefix("pi."),
        value_config: meta.value_config.clone(),
        value_params: params.strip_prefix("vf."),
        obs: meta.obs.clone(),
    };
    model.validate()?;
    let forward = ForwardModel::from_parts(
        meta.forward_config.clone(),
        params.strip_prefix("fwd."),
        meta.forward_norm.clone(),
        meta.num_actions,
    )?;
    Ok((model, forward))
}

/// Reads the networks and run identity from a checkpoint.
pub fn read_bundle(text: &str) -> Result<Bundle, TrainError> {
    let (meta, params) = parse(text)?;
    let (model, forward) = networks(&meta, &params)?;
    Ok(Bundle {
        config: meta.config,
        env_spec: meta.env_spec,
        seed: meta.seed,
        eval_seed: meta.eval_seed,
        constraint: meta.constraint,
        iteration: meta.iteration,
        steps: meta.steps,
        model,
        forward,
    })
}

impl Bundle {
    /// Binds `src` against this checkpoint's environment.
    pub fn bind(&self, src: &str) -> Result<BoundFormula, TrainError> {
        bind_constraint(src, &self.env_spec.build_base(0))
    }
}
