//! Classic-control environments with deterministic dynamics and seeded resets.
//!
//! Dynamics constants follow the reference Gymnasium classic-control
//! implementations. All stochasticity lives in `reset`; `step` is a pure
//! function of state and action.

mod acrobot;
mod cartpole;
mod pendulum;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvId {
    CartPole,
    Acrobot,
    Pendulum,
}

impl EnvId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnvId::CartPole => "cartpole",
            EnvId::Acrobot => "acrobot",
            EnvId::Pendulum => "pendulum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cartpole" => Ok(EnvId::CartPole),
            "acrobot" => Ok(EnvId::Acrobot),
            "pendulum" => Ok(EnvId::Pendulum),
            other => Err(Error::UnknownEnv(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionSpace {
    Discrete(usize),
    Box { low: f64, high: f64, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub id: EnvId,
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub max_episode_steps: usize,
    pub known_max_return: Option<f64>,
}

impl EnvSpec {
    pub fn cartpole() -> Self {
        EnvSpec {
            id: EnvId::CartPole,
            obs_dim: 4,
            action_space: ActionSpace::Discrete(2),
            max_episode_steps: 500,
            known_max_return: Some(500.0),
        }
    }

    pub fn acrobot() -> Self {
        EnvSpec {
            id: EnvId::Acrobot,
            obs_dim: 6,
            action_space: ActionSpace::Discrete(3),
            max_episode_steps: 500,
            known_max_return: None,
        }
    }

    pub fn pendulum() -> Self {
        EnvSpec {
            id: EnvId::Pendulum,
            obs_dim: 3,
            action_space: ActionSpace::Box { low: -2.0, high: 2.0, dim: 1 },
            max_episode_steps: 200,
            known_max_return: None,
        }
    }

    pub fn from_id(id: EnvId) -> Self {
        match id {
            EnvId::CartPole => Self::cartpole(),
            EnvId::Acrobot => Self::acrobot(),
            EnvId::Pendulum => Self::pendulum(),
        }
    }
}

/// Agent choice: a discrete index or a bounded continuous torque vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// Internal physical coordinates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub internal: Vec<f64>,
    pub step_count: usize,
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

/// Draw an initial state from the environment's reference initial
/// distribution. The same seed yields the bit-identical state.
pub fn reset(spec: &EnvSpec, seed: u64) -> (EnvState, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let internal = match spec.id {
        EnvId::CartPole => cartpole::initial_state(&mut rng),
        EnvId::Acrobot => acrobot::initial_state(&mut rng),
        EnvId::Pendulum => pendulum::initial_state(&mut rng),
    };
    let state = EnvState { internal, step_count: 0, finished: false };
    let obs = observe(spec, &state);
    (state, obs)
}

pub fn observe(spec: &EnvSpec, state: &EnvState) -> Vec<f64> {
    match spec.id {
        EnvId::CartPole => state.internal.clone(),
        EnvId::Acrobot => acrobot::observe(&state.internal),
        EnvId::Pendulum => pendulum::observe(&state.internal),
    }
}

/// Advance one step with the reference integrator for the environment.
/// Consumes a state by value semantics: the input is untouched and a new
/// state is returned.
pub fn step(spec: &EnvSpec, state: &EnvState, action: &Action) -> Result<(EnvState, StepResult)> {
    if state.finished {
        return Err(Error::EpisodeFinished);
    }
    match (&spec.action_space, action) {
        (ActionSpace::Discrete(n), Action::Discrete(a)) => {
            if *a >= *n {
                return Err(Error::InvalidAction { got: *a, n: *n });
            }
        }
        (ActionSpace::Box { .. }, Action::Continuous(_)) => {}
        _ => return Err(Error::ActionKindMismatch),
    }

    let (next_internal, reward, terminated) = match (spec.id, action) {
        (EnvId::CartPole, Action::Discrete(a)) => cartpole::step(&state.internal, *a),
        (EnvId::Acrobot, Action::Discrete(a)) => acrobot::step(&state.internal, *a),
        (EnvId::Pendulum, Action::Continuous(u)) => pendulum::step(&state.internal, u[0]),
        _ => unreachable!(),
    };

    let step_count = state.step_count + 1;
    let truncated = !terminated && step_count >= spec.max_episode_steps;
    let next = EnvState {
        internal: next_internal,
        step_count,
        finished: terminated || truncated,
    };
    let observation = observe(spec, &next);
    Ok((next, StepResult { observation, reward, terminated, truncated }))
}

pub fn max_return(spec: &EnvSpec) -> Option<f64> {
    spec.known_max_return
}

/// Wraps to [-pi, pi).
pub(crate) fn angle_normalize(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    ((x + std::f64::consts::PI).rem_euclid(two_pi)) - std::f64::consts::PI
}

#[cfg(test)]
mod tests;
