use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpec, EnvError, Environment, Step};
use crate::dsl::ObjectRegistry;
use crate::state::StateSchema;

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const X_LIMIT: f64 = 2.4;
pub const THETA_LIMIT: f64 = 0.2095;
pub const MAX_STEPS: usize = 500;

/// Classic cart-pole balancing task with explicit Euler integration.
/// State is `(x, x_dot, theta, theta_dot)`; action 0 pushes left, 1 right.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CartPole {
    rng: ChaCha8Rng,
    state: [f64; 4],
    steps: usize,
    done: bool,
    #[serde(skip, default = "cartpole_schema")]
    schema: StateSchema,
    #[serde(skip, default = "cartpole_actions")]
    actions: ActionSpec,
}

fn cartpole_schema() -> StateSchema {
    StateSchema::new(
        &[("x", "m"), ("x_dot", "m/s"), ("theta", "rad"), ("theta_dot", "rad/s")],
        &[("cart", &[0, 1]), ("pole", &[2, 3])],
    )
}

fn cartpole_actions() -> ActionSpec {
    ActionSpec::new(&["push_left", "push_right"])
}

/// Accelerations `(x_acc, theta_acc)` at `state` under horizontal `force`.
pub fn accelerations(state: &[f64; 4], force: f64) -> (f64, f64) {
    let total_mass = CART_MASS + POLE_MASS;
    let pml = POLE_MASS * HALF_LENGTH;
    let [_, _, theta, theta_dot] = *state;
    let (sin, cos) = theta.sin_cos();
    let temp = (force + pml * theta_dot * theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - pml * theta_acc * cos / total_mass;
    (x_acc, theta_acc)
}

/// One Euler step of the dynamics.
pub fn integrate(state: &[f64; 4], action: usize) -> [f64; 4] {
    let force = if action == 1 { FORCE } else { -FORCE };
    let (x_acc, theta_acc) = accelerations(state, force);
    let [x, x_dot, theta, theta_dot] = *state;
    [
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    ]
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: [0.0; 4],
            steps: 0,
            done: false,
            schema: cartpole_schema(),
            actions: cartpole_actions(),
        }
    }

    /// Overrides the physical state and marks the episode active.
    pub fn set_state(&mut self, state: [f64; 4]) -> Result<(), EnvError> {
        if state.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::InvalidState("non-finite cart-pole state".into()));
        }
        self.state = state;
        self.done = false;
        Ok(())
    }
}

impl Environment for CartPole {
    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn action_spec(&self) -> &ActionSpec {
        &self.actions
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Vec<f64> {
        for v in &mut self.state {
            *v = self.rng.gen_range(-0.05..0.05);
        }
        self.steps = 0;
        self.done = false;
        self.state.to_vec()
    }

    fn observe(&self) -> Vec<f64> {
        self.state.to_vec()
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if action >= 2 {
            return Err(EnvError::InvalidAction { action, count: 2 });
        }
        self.state = integrate(&self.state, action);
        self.steps += 1;
        let [x, _, theta, _] = self.state;
        self.done = x.abs() > X_LIMIT || theta.abs() > THETA_LIMIT || self.steps >= MAX_STEPS;
        Ok(Step {
            next_state: self.state.to_vec(),
            reward: 1.0,
            done: self.done,
        })
    }

    fn registry(&self) -> ObjectRegistry {
        ObjectRegistry::new()
    }
}
