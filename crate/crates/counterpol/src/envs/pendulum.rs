//! Torque-controlled pendulum swing-up. Never terminates, only truncates.

use rand::Rng;

use super::angle_normalize;

const DT: f64 = 0.05;
const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;

pub fn initial_state(rng: &mut impl Rng) -> Vec<f64> {
    let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let theta_dot = rng.gen_range(-1.0..1.0);
    vec![theta, theta_dot]
}

/// Observation is [cos theta, sin theta, theta_dot].
pub fn observe(state: &[f64]) -> Vec<f64> {
    vec![state[0].cos(), state[0].sin(), state[1]]
}

/// State is (theta, theta_dot). Torque is clipped, not rejected; the
/// control cost is charged on the clipped value.
pub fn step(state: &[f64], torque: f64) -> (Vec<f64>, f64, bool) {
    let (theta, theta_dot) = (state[0], state[1]);
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);

    let norm = angle_normalize(theta);
    let cost = norm * norm + 0.1 * theta_dot * theta_dot + 0.001 * u * u;

    let new_theta_dot = (theta_dot
        + (3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin()
            + 3.0 / (MASS * LENGTH * LENGTH) * u)
            * DT)
        .clamp(-MAX_SPEED, MAX_SPEED);
    let new_theta = theta + new_theta_dot * DT;

    (vec![new_theta, new_theta_dot], -cost, false)
}
