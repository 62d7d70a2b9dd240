//! Cart-pole balancing, explicit Euler integration.

use rand::Rng;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const X_THRESHOLD: f64 = 2.4;
const THETA_THRESHOLD: f64 = 12.0 * std::f64::consts::PI / 180.0;

pub fn initial_state(rng: &mut impl Rng) -> Vec<f64> {
    (0..4).map(|_| rng.gen_range(-0.05..0.05)).collect()
}

/// State is (x, x_dot, theta, theta_dot); action 1 pushes right.
pub fn step(state: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
    let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
    let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
    let cos_theta = theta.cos();
    let sin_theta = theta.sin();

    let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_theta) / TOTAL_MASS;
    let theta_acc = (GRAVITY * sin_theta - cos_theta * temp)
        / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_theta * cos_theta / TOTAL_MASS));
    let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_theta / TOTAL_MASS;

    let next = vec![
        x + TAU * x_dot,
        x_dot + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    ];
    let terminated =
        next[0].abs() > X_THRESHOLD || next[2].abs() > THETA_THRESHOLD;
    (next, 1.0, terminated)
}
