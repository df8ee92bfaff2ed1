use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::dsl::BoundFormula;
use crate::env::Environment;
use crate::policy::ActorCritic;

/// Outcome of an evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub steps: usize,
    /// Mean environment return over completed episodes; the return of the
    /// unfinished episode if none completed.
    pub mean_return: f64,
    /// Fraction of steps whose true next state satisfies the formula.
    pub satisfaction_rate: f64,
    pub violations: usize,
    pub episodes: usize,
    /// Completed episodes whose final state satisfies the goal formula.
    pub goal_episodes: usize,
}

impl EvalReport {
    pub fn violations_per_1000(&self) -> f64 {
        1000.0 * self.violations as f64 / self.steps as f64
    }

    pub fn goal_fraction(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.goal_episodes as f64 / self.episodes as f64
        }
    }
}

/// How evaluation picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    /// Most probable action.
    Greedy,
    /// Sample from the policy with a dedicated seeded stream.
    Sample(u64),
}

/// Runs the policy for `eval_steps` steps without learning, resetting on
/// episode end. The formula is checked on every true next state; with no
/// formula every step counts as satisfied.
pub fn evaluate_policy(
    model: &ActorCritic,
    env: &mut impl Environment,
    formula: Option<&BoundFormula>,
    goal: Option<&BoundFormula>,
    eval_steps: usize,
    selection: Selection,
) -> Result<EvalReport, TrainError> {
    if eval_steps == 0 {
        return Err(TrainError::Config("evaluation horizon must be at least 1 step".into()));
    }
    let mut rng = match selection {
        Selection::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Selection::Greedy => None,
    };
    let mut state = env.reset();
    let mut returns = Vec::new();
    let mut running = 0.0;
    let mut violations = 0;
    let mut goal_episodes = 0;
    for _ in 0..eval_steps {
        let action = match &mut rng {
            Some(rng) => model.act(&state, rng)?.action,
            None => model.greedy(&state)?,
        };
        let step = env.step(action)?;
        running += step.reward;
        if let Some(f) = formula {
            if !f.evaluate(&step.next_state)? {
                violations += 1;
            }
        }
        if step.done {
            if let Some(g) = goal {
                goal_episodes += usize::from(g.evaluate(&step.next_state)?);
            }
            returns.push(running);
            running = 0.0;
            state = env.reset();
        } else {
            state = step.next_state;
        }
    }
    let mean_return = if returns.is_empty() {
        running
    } else {
        returns.iter().sum::<f64>() / returns.len() as f64
    };
    Ok(EvalReport {
        steps: eval_steps,
        mean_return,
        satisfaction_rate: 1.0 - violations as f64 / eval_steps as f64,
        violations,
        episodes: returns.len(),
        goal_episodes,
    })
}
