use super::*;

#[test]
fn reset_is_seed_deterministic() {
    let spec = EnvSpec::cartpole();
    let (s1, o1) = reset(&spec, 42);
    let (s2, o2) = reset(&spec, 42);
    assert_eq!(s1, s2);
    assert_eq!(o1, o2);
    let (s3, _) = reset(&spec, 43);
    assert_ne!(s1, s3);
}

#[test]
fn cartpole_reset_within_bounds() {
    let spec = EnvSpec::cartpole();
    for seed in 0..200 {
        let (state, _) = reset(&spec, seed);
        for &c in &state.internal {
            assert!((-0.05..0.05).contains(&c));
        }
    }
}

#[test]
fn acrobot_reset_within_bounds() {
    let spec = EnvSpec::acrobot();
    for seed in 0..200 {
        let (state, _) = reset(&spec, seed);
        for &c in &state.internal {
            assert!((-0.1..0.1).contains(&c));
        }
    }
}

#[test]
fn pendulum_observation_on_unit_circle() {
    let spec = EnvSpec::pendulum();
    for seed in 0..100 {
        let (_, obs) = reset(&spec, seed);
        let r = obs[0] * obs[0] + obs[1] * obs[1];
        assert!((r - 1.0).abs() < 1e-12);
    }
}

// Independent single-Euler-step oracle for the cart-pole update.
fn cartpole_euler_oracle(s: [f64; 4], force: f64) -> [f64; 4] {
    let (g, mc, mp, half_l, tau) = (9.8, 1.0, 0.1, 0.5, 0.02);
    let total = mc + mp;
    let (x, xd, th, thd) = (s[0], s[1], s[2], s[3]);
    let temp = (force + mp * half_l * thd * thd * th.sin()) / total;
    let thacc = (g * th.sin() - th.cos() * temp)
        / (half_l * (4.0 / 3.0 - mp * th.cos() * th.cos() / total));
    let xacc = temp - mp * half_l * thacc * th.cos() / total;
    [x + tau * xd, xd + tau * xacc, th + tau * thd, thd + tau * thacc]
}

#[test]
fn cartpole_step_matches_euler_oracle() {
    let spec = EnvSpec::cartpole();
    let state = EnvState { internal: vec![0.0, 0.0, 0.0, 0.0], step_count: 0, finished: false };
    let (next, res) = step(&spec, &state, &Action::Discrete(1)).unwrap();
    let expected = cartpole_euler_oracle([0.0; 4], 10.0);
    for (a, b) in next.internal.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert_eq!(res.reward, 1.0);
    assert!(!res.terminated);

    // A non-trivial state, pushed left.
    let state = EnvState {
        internal: vec![0.03, -0.2, 0.04, 0.3],
        step_count: 7,
        finished: false,
    };
    let (next, _) = step(&spec, &state, &Action::Discrete(0)).unwrap();
    let expected = cartpole_euler_oracle([0.03, -0.2, 0.04, 0.3], -10.0);
    for (a, b) in next.internal.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn acrobot_reward_is_minus_one_until_goal() {
    let spec = EnvSpec::acrobot();
    let (mut state, _) = reset(&spec, 5);
    for a in [0usize, 1, 2, 1, 0, 2, 2, 1] {
        let (next, res) = step(&spec, &state, &Action::Discrete(a)).unwrap();
        if res.terminated {
            assert_eq!(res.reward, 0.0);
            break;
        }
        assert_eq!(res.reward, -1.0);
        state = next;
    }
}

#[test]
fn pendulum_zero_state_zero_torque_zero_reward() {
    let spec = EnvSpec::pendulum();
    let state = EnvState { internal: vec![0.0, 0.0], step_count: 0, finished: false };
    let (_, res) = step(&spec, &state, &Action::Continuous(vec![0.0])).unwrap();
    assert_eq!(res.reward, 0.0);
}

#[test]
fn pendulum_reward_never_positive_and_only_truncates() {
    let spec = EnvSpec::pendulum();
    let (mut state, _) = reset(&spec, 11);
    let mut steps = 0;
    loop {
        let (next, res) = step(&spec, &state, &Action::Continuous(vec![1.5])).unwrap();
        assert!(res.reward <= 0.0);
        assert!(!res.terminated);
        steps += 1;
        if res.truncated {
            break;
        }
        state = next;
    }
    assert_eq!(steps, 200);
}

#[test]
fn episodes_respect_step_cap_and_flags() {
    let spec = EnvSpec::cartpole();
    let (mut state, _) = reset(&spec, 3);
    let mut steps = 0;
    loop {
        // Alternate pushes keep the pole up for a while but not forever.
        let a = if state.internal[2] > 0.0 { 1 } else { 0 };
        let (next, res) = step(&spec, &state, &Action::Discrete(a)).unwrap();
        steps += 1;
        assert!(!(res.terminated && res.truncated));
        if res.terminated || res.truncated {
            assert!(step(&spec, &next, &Action::Discrete(0)).is_err());
            break;
        }
        state = next;
    }
    assert!(steps <= spec.max_episode_steps);
}

#[test]
fn invalid_discrete_action_rejected() {
    let spec = EnvSpec::cartpole();
    let (state, _) = reset(&spec, 0);
    assert!(matches!(
        step(&spec, &state, &Action::Discrete(2)),
        Err(Error::InvalidAction { got: 2, n: 2 })
    ));
    assert!(matches!(
        step(&spec, &state, &Action::Continuous(vec![0.0])),
        Err(Error::ActionKindMismatch)
    ));
}

#[test]
fn pendulum_torque_clipped_not_rejected() {
    let spec = EnvSpec::pendulum();
    let (state, _) = reset(&spec, 0);
    let (n1, _) = step(&spec, &state, &Action::Continuous(vec![100.0])).unwrap();
    let (n2, _) = step(&spec, &state, &Action::Continuous(vec![2.0])).unwrap();
    assert_eq!(n1, n2);
}

#[test]
fn max_return_values() {
    assert_eq!(max_return(&EnvSpec::cartpole()), Some(500.0));
    assert_eq!(max_return(&EnvSpec::acrobot()), None);
    assert_eq!(max_return(&EnvSpec::pendulum()), None);
}

#[test]
fn angle_normalize_range() {
    for i in -20..20 {
        let x = i as f64 * 0.7;
        let n = angle_normalize(x);
        assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&n));
        let turns = (n - x) / (2.0 * std::f64::consts::PI);
        assert!((turns - turns.round()).abs() < 1e-12);
    }
}
