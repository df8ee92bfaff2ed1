//! Run configuration: flat `key = value` files, overridable from the command
//! line. Relative paths in a file resolve against the file's directory;
//! relative paths given on the command line resolve against the working
//! directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use system3::env::{EnvSpec, GridLayout, GridRewards};
use system3::tensor::OptimizerKind;
use system3::trainer::System3Config;

use crate::HarnessError;

/// Every recognised key, in snapshot order, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("name", "experiment name"),
    ("env", "`gridworld` or `cartpole`"),
    ("layout", "grid layout file, or `bridge` for the built-in layout"),
    ("constraint", "constraint file, or `none` for an unconstrained baseline"),
    ("eval_constraint", "formula scored during evaluation; defaults to `constraint`"),
    ("seeds", "comma-separated list of seeds"),
    ("out", "output directory"),
    ("eval_every", "environment steps between evaluations"),
    ("eval_horizon", "steps per evaluation"),
    ("keep_checkpoints", "checkpoints kept per seed, newest first; 0 keeps all"),
    ("parallel_seeds", "train seeds on separate threads"),
    ("delay", "reward delay in steps; 1 means none"),
    ("target_reward", "grid reward on reaching a target"),
    ("unsafe_reward", "grid reward on entering an unsafe cell"),
    ("step_reward", "grid reward added on every step"),
    ("unsafe_terminal", "whether entering an unsafe cell ends the episode"),
    ("max_steps", "grid episode step limit"),
    ("lambda", "weight of the actor-critic loss"),
    ("beta", "weight of the forward-model loss"),
    ("gamma", "discount factor"),
    ("gae_lambda", "GAE smoothing factor"),
    ("learning_rate", "optimizer step size"),
    ("rollout_length", "steps per environment per iteration"),
    ("batch_size", "environments stepped in lockstep"),
    ("total_steps", "training budget in environment steps"),
    ("constraint_reward_weight", "reward granted when the predicted next state satisfies the constraint"),
    ("use_env_reward", "add the environment reward to the constraint reward"),
    ("value_coef", "value-loss coefficient"),
    ("entropy_coef", "entropy-bonus coefficient"),
    ("hidden", "policy and value hidden layer sizes"),
    ("model_hidden", "forward-model hidden layer sizes"),
    ("optimizer", "`adam` or `sgd`"),
    ("warmup_iterations", "initial iterations that train only the forward model"),
];

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    base: Option<PathBuf>,
}

/// Raw key/value settings before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, Entry>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, HarnessError> {
        let mut out = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !known(key) {
                return Err(config_err(format!("line {}: unknown key `{key}`", i + 1)));
            }
            let entry = Entry {
                value: value.trim().to_string(),
                base: base.map(Path::to_path_buf),
            };
            if out.entries.insert(key.to_string(), entry).is_some() {
                return Err(config_err(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text, Some(path.parent().unwrap_or(Path::new("."))))
    }

    /// Sets a key from the command line; the value wins over file entries.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        if !known(key) {
            return Err(config_err(format!("unknown key `{key}`")));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                base: None,
            },
        );
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(|e| match &e.base {
            Some(base) if Path::new(&e.value).is_relative() => base.join(&e.value),
            _ => PathBuf::from(&e.value),
        })
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, HarnessError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => parse_value(key, v),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse()
        .map_err(|_| config_err(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, HarnessError> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(format!("`{key}`: expected true or false, found `{v}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, HarnessError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvId {
    Gridworld,
    Cartpole,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::Gridworld => "gridworld",
            EnvId::Cartpole => "cartpole",
        }
    }
}

impl FromStr for EnvId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gridworld" | "grid" => Ok(EnvId::Gridworld),
            "cartpole" => Ok(EnvId::Cartpole),
            _ => Err(config_err(format!("`env`: expected gridworld or cartpole, found `{s}`"))),
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub env: EnvId,
    /// `None` selects the built-in bridge layout.
    pub layout: Option<PathBuf>,
    /// `None` trains the unconstrained baseline.
    pub constraint: Option<PathBuf>,
    pub eval_constraint: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub eval_every: u64,
    pub eval_horizon: usize,
    pub keep_checkpoints: usize,
    pub parallel_seeds: bool,
    pub delay: usize,
    pub grid_rewards: GridRewards,
    pub system: System3Config,
}

fn optional_path(s: &Settings, key: &str) -> Option<PathBuf> {
    match s.get(key) {
        None | Some("none") | Some("") => None,
        Some(_) => s.path(key),
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, HarnessError> {
        let d = System3Config::default();
        let g = GridRewards::default();
        let name = s.get("name").unwrap_or("run").to_string();
        let env = s.parsed("env", EnvId::Gridworld)?;
        let layout = match s.get("layout") {
            None | Some("bridge") => None,
            Some(_) => s.path("layout"),
        };
        let constraint = optional_path(s, "constraint");
        let eval_constraint = if s.get("eval_constraint").is_some() {
            optional_path(s, "eval_constraint")
        } else {
            constraint.clone()
        };
        let seeds = match s.get("seeds") {
            None => vec![0],
            Some(v) => parse_list("seeds", v)?,
        };
        let out = s.path("out").unwrap_or_else(|| PathBuf::from("runs").join(&name));
        let optimizer = match s.get("optimizer").unwrap_or("adam") {
            "adam" => OptimizerKind::Adam,
            "sgd" => OptimizerKind::Sgd,
            other => return Err(config_err(format!("`optimizer`: expected adam or sgd, found `{other}`"))),
        };
        let bool_key = |key: &str, default: bool| s.get(key).map_or(Ok(default), |v| parse_bool(key, v));
        let sizes = |key: &str, default: &[usize]| s.get(key).map_or(Ok(default.to_vec()), |v| parse_list(key, v));
        let system = System3Config {
            lambda: s.parsed("lambda", d.lambda)?,
            beta: s.parsed("beta", d.beta)?,
            gamma: s.parsed("gamma", d.gamma)?,
            gae_lambda: s.parsed("gae_lambda", d.gae_lambda)?,
            learning_rate: s.parsed("learning_rate", d.learning_rate)?,
            rollout_length: s.parsed("rollout_length", d.rollout_length)?,
            batch_size: s.parsed("batch_size", d.batch_size)?,
            total_steps: s.parsed("total_steps", d.total_steps)?,
            constraint_reward_weight: s.parsed("constraint_reward_weight", d.constraint_reward_weight)?,
            use_env_reward: bool_key("use_env_reward", d.use_env_reward)?,
            value_coef: s.parsed("value_coef", d.value_coef)?,
            entropy_coef: s.parsed("entropy_coef", d.entropy_coef)?,
            hidden: sizes("hidden", &d.hidden)?,
            model_hidden: sizes("model_hidden", &d.model_hidden)?,
            optimizer,
            warmup_iterations: s.parsed("warmup_iterations", d.warmup_iterations)?,
        };
        let config = RunConfig {
            name,
            env,
            layout,
            constraint,
            eval_constraint,
            seeds,
            out,
            eval_every: s.parsed("eval_every", 400)?,
            eval_horizon: s.parsed("eval_horizon", 1000)?,
            keep_checkpoints: s.parsed("keep_checkpoints", 3)?,
            parallel_seeds: bool_key("parallel_seeds", false)?,
            delay: s.parsed("delay", 1)?,
            grid_rewards: GridRewards {
                target: s.parsed("target_reward", g.target)?,
                unsafe_cell: s.parsed("unsafe_reward", g.unsafe_cell)?,
                step: s.parsed("step_reward", g.step)?,
                unsafe_terminal: bool_key("unsafe_terminal", g.unsafe_terminal)?,
                max_steps: s.parsed("max_steps", g.max_steps)?,
            },
            system,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(config_err("`seeds` must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(config_err("`seeds` contains duplicates"));
        }
        if self.eval_every == 0 {
            return Err(config_err("`eval_every` must be at least 1"));
        }
        if self.eval_horizon == 0 {
            return Err(config_err("`eval_horizon` must be at least 1"));
        }
        if self.delay == 0 {
            return Err(config_err("`delay` must be at least 1"));
        }
        if self.grid_rewards.max_steps == 0 {
            return Err(config_err("`max_steps` must be at least 1"));
        }
        let r = &self.grid_rewards;
        if ![r.target, r.unsafe_cell, r.step].iter().all(|v| v.is_finite()) {
            return Err(config_err("grid rewards must be finite"));
        }
        self.system.validate().map_err(|e| config_err(e.to_string()))
    }

    /// Builds the environment recipe, reading the layout file if any.
    pub fn env_spec(&self) -> Result<EnvSpec, HarnessError> {
        let mut spec = match self.env {
            EnvId::Cartpole => EnvSpec::cartpole(self.delay),
            EnvId::Gridworld => {
                let layout = match &self.layout {
                    None => GridLayout::bridge(),
                    Some(path) => read_layout(path)?,
                };
                EnvSpec::grid(layout, self.grid_rewards)
            }
        };
        spec.delay = self.delay;
        Ok(spec)
    }

    pub fn constraint_source(&self) -> Result<Option<String>, HarnessError> {
        self.constraint.as_deref().map(read_constraint).transpose()
    }

    pub fn eval_constraint_source(&self) -> Result<Option<String>, HarnessError> {
        self.eval_constraint.as_deref().map(read_constraint).transpose()
    }

    /// Serializes every key; loading the text back yields an equal config.
    pub fn to_text(&self) -> String {
        let s = &self.system;
        let r = &self.grid_rewards;
        let path = |p: &Option<PathBuf>, none: &str| p.as_ref().map_or(none.to_string(), |p| p.display().to_string());
        let values: Vec<(&str, String)> = vec![
            ("name", self.name.clone()),
            ("env", self.env.as_str().to_string()),
            ("layout", path(&self.layout, "bridge")),
            ("constraint", path(&self.constraint, "none")),
            ("eval_constraint", path(&self.eval_constraint, "none")),
            ("seeds", join(&self.seeds)),
            ("out", self.out.display().to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("eval_horizon", self.eval_horizon.to_string()),
            ("keep_checkpoints", self.keep_checkpoints.to_string()),
            ("parallel_seeds", self.parallel_seeds.to_string()),
            ("delay", self.delay.to_string()),
            ("target_reward", r.target.to_string()),
            ("unsafe_reward", r.unsafe_cell.to_string()),
            ("step_reward", r.step.to_string()),
            ("unsafe_terminal", r.unsafe_terminal.to_string()),
            ("max_steps", r.max_steps.to_string()),
            ("lambda", s.lambda.to_string()),
            ("beta", s.beta.to_string()),
            ("gamma", s.gamma.to_string()),
            ("gae_lambda", s.gae_lambda.to_string()),
            ("learning_rate", s.learning_rate.to_string()),
            ("rollout_length", s.rollout_length.to_string()),
            ("batch_size", s.batch_size.to_string()),
            ("total_steps", s.total_steps.to_string()),
            ("constraint_reward_weight", s.constraint_reward_weight.to_string()),
            ("use_env_reward", s.use_env_reward.to_string()),
            ("value_coef", s.value_coef.to_string()),
            ("entropy_coef", s.entropy_coef.to_string()),
            ("hidden", join(&s.hidden)),
            ("model_hidden", join(&s.model_hidden)),
            (
                "optimizer",
                match s.optimizer {
                    OptimizerKind::Adam => "adam",
                    OptimizerKind::Sgd => "sgd",
                }
                .to_string(),
            ),
            ("warmup_iterations", s.warmup_iterations.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Reads a constraint file, naming the path when it is missing.
pub fn read_constraint(path: &Path) -> Result<String, HarnessError> {
    if !path.is_file() {
        return Err(config_err(format!("constraint file not found: {}", path.display())));
    }
    std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))
}

pub fn read_layout(path: &Path) -> Result<GridLayout, HarnessError> {
    if !path.is_file() {
        return Err(config_err(format!("layout file not found: {}", path.display())));
    }
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    text.parse()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))
}
