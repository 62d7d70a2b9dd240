//! Counterfactual explanation policies for classic-control RL.
//!
//! Given a trained policy and a target return, the optimizer finds a
//! minimal KL-proximal modification of that policy whose expected return
//! matches the target, using on-policy Monte-Carlo policy gradients with
//! an iteratively re-pivoted KL penalty. The crate also ships the three
//! classic-control environments, a from-scratch baseline trainer that
//! produces the original-policy checkpoints, and a harness checking that
//! with an unattainable target the update direction coincides with a
//! KL-penalized trust-region ascent step.

pub mod counterfactual;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod persist;
pub mod policy;
pub mod rollout;
pub mod trainer;

pub use counterfactual::{counterpol_optimize, CounterpolConfig, RunLog, RunStatus};
pub use envs::{Action, ActionSpace, EnvId, EnvSpec};
pub use error::{Error, Result};
pub use policy::{PolicyArch, PolicyParams};
