//! Two-link underactuated pendulum, RK4 integration.

use rand::Rng;

use super::angle_normalize;

const DT: f64 = 0.2;
const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_POS_1: f64 = 0.5;
const LINK_COM_POS_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const GRAVITY: f64 = 9.8;
const MAX_VEL_1: f64 = 4.0 * std::f64::consts::PI;
const MAX_VEL_2: f64 = 9.0 * std::f64::consts::PI;

pub fn initial_state(rng: &mut impl Rng) -> Vec<f64> {
    (0..4).map(|_| rng.gen_range(-0.1..0.1)).collect()
}

/// Observation is [cos t1, sin t1, cos t2, sin t2, dt1, dt2].
pub fn observe(state: &[f64]) -> Vec<f64> {
    vec![
        state[0].cos(),
        state[0].sin(),
        state[1].cos(),
        state[1].sin(),
        state[2],
        state[3],
    ]
}

fn dynamics(s: &[f64; 5]) -> [f64; 5] {
    let (theta1, theta2, dtheta1, dtheta2, torque) = (s[0], s[1], s[2], s[3], s[4]);
    let m1 = LINK_MASS_1;
    let m2 = LINK_MASS_2;
    let l1 = LINK_LENGTH_1;
    let lc1 = LINK_COM_POS_1;
    let lc2 = LINK_COM_POS_2;
    let i1 = LINK_MOI;
    let i2 = LINK_MOI;
    let g = GRAVITY;
    let half_pi = std::f64::consts::FRAC_PI_2;

    let d1 = m1 * lc1 * lc1
        + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos())
        + i1
        + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
    let phi2 = m2 * lc2 * g * (theta1 + theta2 - half_pi).cos();
    let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
        - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
        + (m1 * lc1 + m2 * l1) * g * (theta1 - half_pi).cos()
        + phi2;
    let ddtheta2 = (torque + d2 / d1 * phi1
        - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
        - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
    [dtheta1, dtheta2, ddtheta1, ddtheta2, 0.0]
}

fn rk4_step(s: &[f64; 5], dt: f64) -> [f64; 5] {
    let k1 = dynamics(s);
    let mut s2 = *s;
    for i in 0..5 {
        s2[i] = s[i] + dt / 2.0 * k1[i];
    }
    let k2 = dynamics(&s2);
    let mut s3 = *s;
    for i in 0..5 {
        s3[i] = s[i] + dt / 2.0 * k2[i];
    }
    let k3 = dynamics(&s3);
    let mut s4 = *s;
    for i in 0..5 {
        s4[i] = s[i] + dt * k3[i];
    }
    let k4 = dynamics(&s4);
    let mut out = *s;
    for i in 0..5 {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// State is (theta1, theta2, dtheta1, dtheta2); torque is action - 1.
pub fn step(state: &[f64], action: usize) -> (Vec<f64>, f64, bool) {
    let torque = action as f64 - 1.0;
    let aug = [state[0], state[1], state[2], state[3], torque];
    let ns = rk4_step(&aug, DT);
    let next = vec![
        angle_normalize(ns[0]),
        angle_normalize(ns[1]),
        ns[2].clamp(-MAX_VEL_1, MAX_VEL_1),
        ns[3].clamp(-MAX_VEL_2, MAX_VEL_2),
    ];
    let terminated = -next[0].cos() - (next[1] + next[0]).cos() > 1.0;
    let reward = if terminated { 0.0 } else { -1.0 };
    (next, reward, terminated)
}
