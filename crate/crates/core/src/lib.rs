//! Safety-constrained actor-critic training.
//!
//! Expert knowledge is written as first-order constraints over p-norm
//! distances in state space. A learned one-step forward model predicts the
//! next state, the constraint is checked on that prediction, and the result
//! becomes a per-step reward added to the environment reward.

pub mod tensor;
pub mod dsl;
pub mod env;
pub mod forward_model;
pub mod policy;
pub mod trainer;
pub mod state;
