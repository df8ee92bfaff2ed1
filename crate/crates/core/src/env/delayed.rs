use serde::{Deserialize, Serialize};

use super::{ActionSpec, EnvError, Environment, Step};
use crate::dsl::ObjectRegistry;
use crate::state::StateSchema;

/// Withholds environment reward and releases the accumulated sum every
/// `d`-th step of an episode and on the episode's final step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayedReward<E> {
    inner: E,
    delay: usize,
    pending: f64,
    count: usize,
}

impl<E: Environment> DelayedReward<E> {
    pub fn new(inner: E, delay: usize) -> Result<Self, EnvError> {
        if delay == 0 {
            return Err(EnvError::InvalidDelay);
        }
        Ok(Self {
            inner,
            delay,
            pending: 0.0,
            count: 0,
        })
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut E {
        &mut self.inner
    }

    pub fn into_inner(self) -> E {
        self.inner
    }
}

impl<E: Environment> Environment for DelayedReward<E> {
    fn schema(&self) -> &StateSchema {
        self.inner.schema()
    }

    fn action_spec(&self) -> &ActionSpec {
        self.inner.action_spec()
    }

    fn seed(&mut self, seed: u64) {
        self.inner.seed(seed);
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pending = 0.0;
        self.count = 0;
        self.inner.reset()
    }

    fn observe(&self) -> Vec<f64> {
        self.inner.observe()
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        let mut step = self.inner.step(action)?;
        self.pending += step.reward;
        self.count += 1;
        if step.done || self.count.is_multiple_of(self.delay) {
            step.reward = self.pending;
            self.pending = 0.0;
        } else {
            step.reward = 0.0;
        }
        Ok(step)
    }

    fn registry(&self) -> ObjectRegistry {
        self.inner.registry()
    }
}
