//! Seeded simulation environments: a slippery grid world and cart-pole,
//! plus a wrapper that delays environment reward.

pub mod cartpole;
mod delayed;
pub mod grid;
mod layout;

pub use cartpole::CartPole;
pub use delayed::DelayedReward;
pub use grid::{GridRewards, GridWorld};
pub use layout::{Cell, GridLayout};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::ObjectRegistry;
use crate::state::StateSchema;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("action {action} out of range for {count} actions")]
    InvalidAction { action: usize, count: usize },
    #[error("step called after the episode ended")]
    EpisodeDone,
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("reward delay must be at least 1")]
    InvalidDelay,
    #[error("layout line {line}: {msg}")]
    Layout { line: usize, msg: String },
}

/// Discrete action set with a label per action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub labels: Vec<String>,
}

impl ActionSpec {
    pub fn new(labels: &[&str]) -> Self {
        Self {
            labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// One recorded step together with the constraint signal computed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub env_reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub predicted_next: Option<Vec<f64>>,
    pub constraint_reward: Option<f64>,
}

pub trait Environment {
    fn schema(&self) -> &StateSchema;

    fn action_spec(&self) -> &ActionSpec;

    /// Reseeds the environment's random stream.
    fn seed(&mut self, seed: u64);

    /// Starts a new episode and returns its initial state.
    fn reset(&mut self) -> Vec<f64>;

    /// Current state.
    fn observe(&self) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<Step, EnvError>;

    /// Object sets that constraint formulas can quantify over.
    fn registry(&self) -> ObjectRegistry;
}

/// Either built-in environment, so runs can be configured and checkpointed
/// without generics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BaseEnv {
    Grid(GridWorld),
    CartPole(CartPole),
}

macro_rules! delegate {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            BaseEnv::Grid($e) => $body,
            BaseEnv::CartPole($e) => $body,
        }
    };
}

impl Environment for BaseEnv {
    fn schema(&self) -> &StateSchema {
        delegate!(self, e => e.schema())
    }

    fn action_spec(&self) -> &ActionSpec {
        delegate!(self, e => e.action_spec())
    }

    fn seed(&mut self, seed: u64) {
        delegate!(self, e => e.seed(seed))
    }

    fn reset(&mut self) -> Vec<f64> {
        delegate!(self, e => e.reset())
    }

    fn observe(&self) -> Vec<f64> {
        delegate!(self, e => e.observe())
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        delegate!(self, e => e.step(action))
    }

    fn registry(&self) -> ObjectRegistry {
        delegate!(self, e => e.registry())
    }
}

impl BaseEnv {
    pub fn as_grid(&self) -> Option<&GridWorld> {
        match self {
            BaseEnv::Grid(g) => Some(g),
            BaseEnv::CartPole(_) => None,
        }
    }
}

/// The environment type used by training: a base environment behind a
/// reward delay (delay 1 passes rewards through unchanged).
pub type EnvInstance = DelayedReward<BaseEnv>;

/// Which environment to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvKind {
    Grid { layout: GridLayout, rewards: GridRewards },
    CartPole,
}

/// Serializable recipe for environment instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Reward delay `d`; 1 means no delay.
    pub delay: usize,
}

impl EnvSpec {
    pub fn grid(layout: GridLayout, rewards: GridRewards) -> Self {
        Self {
            kind: EnvKind::Grid { layout, rewards },
            delay: 1,
        }
    }

    pub fn cartpole(delay: usize) -> Self {
        Self {
            kind: EnvKind::CartPole,
            delay,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            EnvKind::Grid { .. } => "gridworld",
            EnvKind::CartPole => "cartpole",
        }
    }

    pub fn build_base(&self, seed: u64) -> BaseEnv {
        match &self.kind {
            EnvKind::Grid { layout, rewards } => BaseEnv::Grid(GridWorld::new(layout.clone(), *rewards, seed)),
            EnvKind::CartPole => BaseEnv::CartPole(CartPole::new(seed)),
        }
    }

    pub fn build(&self, seed: u64) -> Result<EnvInstance, EnvError> {
        DelayedReward::new(self.build_base(seed), self.delay)
    }
}
