//! On-policy episode sampling and Monte-Carlo estimators: discounted
//! returns, reward-to-go, the batch performance estimate, and the
//! state-visitation KL estimate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::envs::{self, Action, ActionSpace, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::{self, PolicyParams};

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    /// Log-probability under the sampling distribution, recorded at
    /// sampling time (for Gaussian heads, of the pre-clip action).
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub trajectories: Vec<Trajectory>,
    pub gamma: f64,
}

impl Batch {
    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(|t| t.len()).sum()
    }
}

/// Distinct stream for action sampling so it never collides with the
/// reset stream, which is seeded with the episode seed directly.
const ACTION_STREAM: u64 = 0x9e3779b97f4a7c15;

/// Sample one complete episode. Reset uses `seed`; action draws use an
/// independent stream derived from it.
pub fn sample_episode(spec: &EnvSpec, params: &PolicyParams, seed: u64) -> Result<Trajectory> {
    if params.arch.obs_dim != spec.obs_dim {
        return Err(Error::ObsDimMismatch { got: params.arch.obs_dim, expected: spec.obs_dim });
    }
    let mut action_rng = ChaCha8Rng::seed_from_u64(seed ^ ACTION_STREAM);
    let (mut state, mut obs) = envs::reset(spec, seed);
    let mut steps = Vec::new();
    loop {
        let dist = policy::forward(params, &obs)?;
        let action = policy::sample(&dist, &mut action_rng);
        let log_prob = policy::log_prob(&dist, &action)?;
        let env_action = clip_to_space(&action, &spec.action_space);
        let (next, result) = envs::step(spec, &state, &env_action)?;
        steps.push(StepRecord { obs, action, reward: result.reward, log_prob });
        if result.terminated || result.truncated {
            break;
        }
        state = next;
        obs = result.observation;
    }
    Ok(Trajectory { steps, seed })
}

fn clip_to_space(action: &Action, space: &ActionSpace) -> Action {
    match (action, space) {
        (Action::Continuous(v), ActionSpace::Box { low, high, .. }) => {
            Action::Continuous(v.iter().map(|u| u.clamp(*low, *high)).collect())
        }
        _ => action.clone(),
    }
}

/// N complete episodes; episode i is seeded with `base_seed + i`, so
/// single episodes can be replayed in isolation.
pub fn sample_episodes(
    spec: &EnvSpec,
    params: &PolicyParams,
    n: usize,
    base_seed: u64,
    gamma: f64,
) -> Result<Batch> {
    let trajectories: Result<Vec<Trajectory>> = (0..n as u64)
        .into_par_iter()
        .map(|i| sample_episode(spec, params, base_seed.wrapping_add(i)))
        .collect();
    Ok(Batch { trajectories: trajectories?, gamma })
}

pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut scale = 1.0;
    for step in &traj.steps {
        acc += scale * step.reward;
        scale *= gamma;
    }
    acc
}

pub fn reward_to_go(traj: &Trajectory, t: usize, gamma: f64) -> Result<f64> {
    if t >= traj.len() {
        return Err(Error::IndexOutOfRange { index: t, len: traj.len() });
    }
    let mut acc = 0.0;
    let mut scale = 1.0;
    for step in &traj.steps[t..] {
        acc += scale * step.reward;
        scale *= gamma;
    }
    Ok(acc)
}

/// Suffix sums of discounted rewards for every t at once.
pub fn reward_to_go_all(traj: &Trajectory, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; traj.len()];
    let mut acc = 0.0;
    for (i, step) in traj.steps.iter().enumerate().rev() {
        acc = step.reward + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Mean discounted return over the batch. Sequential summation over the
/// episode index keeps the result bit-stable.
pub fn estimate_performance(batch: &Batch) -> f64 {
    let sum: f64 = batch
        .trajectories
        .iter()
        .map(|t| discounted_return(t, batch.gamma))
        .sum();
    sum / batch.trajectories.len() as f64
}

/// Per-state KL(pivot || params) averaged over every state visited in
/// the batch.
pub fn estimate_kl(pivot: &PolicyParams, params: &PolicyParams, batch: &Batch) -> Result<f64> {
    if pivot.arch != params.arch {
        return Err(Error::ArchMismatch);
    }
    let partials: Result<Vec<f64>> = batch
        .trajectories
        .par_iter()
        .map(|traj| {
            let mut sum = 0.0;
            for step in &traj.steps {
                let d0 = policy::forward(pivot, &step.obs)?;
                let d1 = policy::forward(params, &step.obs)?;
                sum += policy::kl_divergence(&d0, &d1)?;
            }
            Ok(sum)
        })
        .collect();
    // Sequential reduction over episode index keeps the value bit-stable.
    let total: f64 = partials?.iter().sum();
    Ok(total / batch.total_steps() as f64)
}

/// CSV trace export: one row per step, columns
/// (episode, t, obs..., action, reward, log_prob).
pub fn write_trace_csv<W: std::io::Write>(batch: &Batch, obs_dim: usize, w: &mut W) -> Result<()> {
    write!(w, "episode,t")?;
    for d in 0..obs_dim {
        write!(w, ",obs{d}")?;
    }
    writeln!(w, ",action,reward,log_prob")?;
    for (i, traj) in batch.trajectories.iter().enumerate() {
        for (t, step) in traj.steps.iter().enumerate() {
            write!(w, "{i},{t}")?;
            for x in &step.obs {
                write!(w, ",{x}")?;
            }
            let action = match &step.action {
                Action::Discrete(a) => a.to_string(),
                Action::Continuous(v) => {
                    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
                }
            };
            writeln!(w, ",{action},{},{}", step.reward, step.log_prob)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{init_params, Head, PolicyArch};

    fn traj(rewards: &[f64]) -> Trajectory {
        Trajectory {
            steps: rewards
                .iter()
                .map(|&r| StepRecord {
                    obs: vec![0.0; 4],
                    action: Action::Discrete(0),
                    reward: r,
                    log_prob: -0.7,
                })
                .collect(),
            seed: 0,
        }
    }

    fn cartpole_params(seed: u64) -> PolicyParams {
        init_params(
            &PolicyArch::new(4, vec![16], Head::Categorical { n_actions: 2 }),
            seed,
        )
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = EnvSpec::cartpole();
        let params = cartpole_params(1);
        let a = sample_episodes(&spec, &params, 5, 100, 0.99).unwrap();
        let b = sample_episodes(&spec, &params, 5, 100, 0.99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn episode_seed_derivation_is_base_plus_index() {
        let spec = EnvSpec::cartpole();
        let params = cartpole_params(1);
        let batch = sample_episodes(&spec, &params, 4, 100, 0.99).unwrap();
        let replayed = sample_episode(&spec, &params, 102).unwrap();
        assert_eq!(batch.trajectories[2], replayed);
    }

    #[test]
    fn batch_cardinality() {
        let spec = EnvSpec::cartpole();
        let params = cartpole_params(2);
        let batch = sample_episodes(&spec, &params, 10, 7, 1.0).unwrap();
        assert_eq!(batch.trajectories.len(), 10);
        for t in &batch.trajectories {
            assert!(!t.is_empty());
            assert!(t.len() <= spec.max_episode_steps);
        }
    }

    #[test]
    fn always_left_policy_falls_early() {
        // Strong bias toward action 0 via a large head bias.
        let spec = EnvSpec::cartpole();
        let mut params = cartpole_params(3);
        let n = params.theta.len();
        params.theta[n - 2] = 50.0; // logit 0 bias
        let batch = sample_episodes(&spec, &params, 10, 0, 1.0).unwrap();
        for t in &batch.trajectories {
            assert!(t.len() < 200, "episode survived {} steps", t.len());
        }
    }

    #[test]
    fn discounted_return_oracle() {
        let t = traj(&[1.0, 1.0, 1.0]);
        assert!((discounted_return(&t, 0.99) - 2.9701).abs() < 1e-12);
        assert_eq!(discounted_return(&t, 1.0), 3.0);
    }

    #[test]
    fn reward_to_go_values() {
        let t = traj(&[2.0, 3.0, 5.0]);
        assert_eq!(reward_to_go(&t, 1, 0.5).unwrap(), 5.5);
        assert_eq!(reward_to_go(&t, 2, 0.5).unwrap(), 5.0);
        assert!(reward_to_go(&t, 3, 0.5).is_err());

        let unit = traj(&[1.0; 7]);
        for i in 0..7 {
            assert_eq!(reward_to_go(&unit, i, 1.0).unwrap(), (7 - i) as f64);
        }
    }

    #[test]
    fn reward_to_go_all_matches_pointwise() {
        let t = traj(&[0.5, -1.0, 2.0, 0.25]);
        let all = reward_to_go_all(&t, 0.9);
        for (i, v) in all.iter().enumerate() {
            assert!((v - reward_to_go(&t, i, 0.9).unwrap()).abs() < 1e-12);
        }
        assert!((all[0] - discounted_return(&t, 0.9)).abs() < 1e-12);
    }

    #[test]
    fn performance_is_mean_of_returns() {
        let batch = Batch { trajectories: vec![traj(&[10.0]), traj(&[20.0])], gamma: 1.0 };
        assert_eq!(estimate_performance(&batch), 15.0);

        let same = Batch { trajectories: vec![traj(&[4.0, 1.0]); 5], gamma: 1.0 };
        assert_eq!(estimate_performance(&same), 5.0);
    }

    #[test]
    fn performance_translation_linear_for_unit_gamma() {
        let base = traj(&[1.0, 2.0, 3.0]);
        let shifted = traj(&[2.0, 3.0, 4.0]);
        let b0 = Batch { trajectories: vec![base], gamma: 1.0 };
        let b1 = Batch { trajectories: vec![shifted], gamma: 1.0 };
        assert_eq!(estimate_performance(&b1), estimate_performance(&b0) + 3.0);
    }

    #[test]
    fn kl_estimate_zero_at_self_and_matches_per_state_oracle() {
        let spec = EnvSpec::cartpole();
        let params = cartpole_params(5);
        let batch = sample_episodes(&spec, &params, 2, 50, 1.0).unwrap();
        assert_eq!(estimate_kl(&params, &params, &batch).unwrap(), 0.0);

        let other = cartpole_params(6);
        let est = estimate_kl(&params, &other, &batch).unwrap();
        assert!(est > 0.0);

        // Hand-averaged per-state closed-form oracle.
        let mut total = 0.0;
        let mut count = 0;
        for t in &batch.trajectories {
            for s in &t.steps {
                let d0 = crate::policy::forward(&params, &s.obs).unwrap();
                let d1 = crate::policy::forward(&other, &s.obs).unwrap();
                total += crate::policy::kl_divergence(&d0, &d1).unwrap();
                count += 1;
            }
        }
        assert!((est - total / count as f64).abs() < 1e-12);
    }

    #[test]
    fn single_step_trajectory_kl_equals_per_state_kl() {
        let params = cartpole_params(7);
        let other = cartpole_params(8);
        let one = Batch {
            trajectories: vec![Trajectory {
                steps: vec![StepRecord {
                    obs: vec![0.1, -0.2, 0.03, 0.4],
                    action: Action::Discrete(1),
                    reward: 1.0,
                    log_prob: -0.5,
                }],
                seed: 0,
            }],
            gamma: 1.0,
        };
        let d0 = crate::policy::forward(&params, &one.trajectories[0].steps[0].obs).unwrap();
        let d1 = crate::policy::forward(&other, &one.trajectories[0].steps[0].obs).unwrap();
        let per_state = crate::policy::kl_divergence(&d0, &d1).unwrap();
        assert_eq!(estimate_kl(&params, &other, &one).unwrap(), per_state);
    }

    #[test]
    fn trace_csv_shape() {
        let spec = EnvSpec::cartpole();
        let params = cartpole_params(9);
        let batch = sample_episodes(&spec, &params, 2, 3, 1.0).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&batch, spec.obs_dim, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "episode,t,obs0,obs1,obs2,obs3,action,reward,log_prob");
        assert_eq!(text.lines().count(), 1 + batch.total_steps());
    }
}
