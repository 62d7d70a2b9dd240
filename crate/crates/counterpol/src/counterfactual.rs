//! Counterfactual explanation policy optimization: gradient assembly for
//! the return-penalty and KL terms, the iterative KL-pivoting descent
//! loop with its stopping criterion, and the trust-region comparison
//! harness.

use serde::{Deserialize, Serialize};

use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::policy::{self, GradVector, PolicyParams};
use crate::rollout::{self, Batch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterpolConfig {
    pub r_target: f64,
    /// Stopping tolerance on |J - r_target|.
    pub delta: f64,
    /// KL proximity weight.
    pub k: f64,
    /// Gradient steps per pivot update.
    pub m: usize,
    /// Episodes per update batch.
    pub n_episodes: usize,
    /// Step size.
    pub eta: f64,
    pub gamma: f64,
    pub max_outer_iters: usize,
    pub seed: u64,
}

impl CounterpolConfig {
    /// Per-environment defaults: delta and k follow the tabulated
    /// values for each task, eta and the iteration cap are desk-scale
    /// choices. Targets are in undiscounted return units, so gamma is 1.
    pub fn defaults_for(spec: &EnvSpec, r_target: f64, seed: u64) -> Self {
        use crate::envs::EnvId;
        // Pendulum's k = 1e5 makes the KL penalty an extremely stiff
        // spring in weight space; plain gradient steps are only stable
        // for eta ~ 3e-7, and past a few hundred outer iterations the
        // pinned-to-pivot dynamics yield no further return movement, so
        // the cap is tightened there to bound runtime.
        let (delta, k, eta, max_outer_iters) = match spec.id {
            EnvId::CartPole => (10.0, 10.0, 5e-2, 2000),
            EnvId::Acrobot => (2.5, 1.0, 3e-2, 2000),
            EnvId::Pendulum => (37.5, 1e5, 3e-7, 300),
        };
        CounterpolConfig {
            r_target,
            delta,
            k,
            m: 10,
            n_episodes: 10,
            eta,
            gamma: 1.0,
            max_outer_iters,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub outer_iter: usize,
    pub inner_step: usize,
    pub j_estimate: f64,
    pub kl_estimate: f64,
    pub return_penalty: f64,
    pub grad_norm: f64,
    pub pivot_updated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxItersExceeded,
    NonFiniteGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<UpdateRecord>,
    pub status: RunStatus,
    /// Pivot replacements performed.
    pub n_outer_updates: usize,
    /// Gradient steps performed.
    pub n_inner_steps: usize,
    pub total_episodes: usize,
}

impl RunLog {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "outer_iter,inner_step,j_estimate,kl_estimate,return_penalty,grad_norm,pivot_updated"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.outer_iter,
                r.inner_step,
                r.j_estimate,
                r.kl_estimate,
                r.return_penalty,
                r.grad_norm,
                r.pivot_updated
            )?;
        }
        Ok(())
    }
}

/// Reward-to-go weighted score estimator, normalized by the total number
/// of steps in the batch. No baseline subtraction.
pub fn policy_gradient_estimate(params: &PolicyParams, batch: &Batch) -> Result<GradVector> {
    use rayon::prelude::*;
    // Per-trajectory partials in parallel, reduced sequentially in
    // episode order so the result is bit-stable.
    let partials: Result<Vec<GradVector>> = batch
        .trajectories
        .par_iter()
        .map(|traj| {
            let mut part = GradVector::zeros(params.theta.len());
            let rtg = rollout::reward_to_go_all(traj, batch.gamma);
            for (t, step) in traj.steps.iter().enumerate() {
                let g = policy::grad_log_prob(params, &step.obs, &step.action)?;
                part.add_scaled(&g, rtg[t]);
            }
            Ok(part)
        })
        .collect();
    let mut grad = GradVector::zeros(params.theta.len());
    for part in partials? {
        grad.add_scaled(&part, 1.0);
    }
    Ok(grad.scaled(1.0 / batch.total_steps() as f64))
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of |J - r_target| under the l1 penalty: the policy gradient
/// signed by where the estimate sits relative to the target. sgn(0) = 0.
pub fn return_penalty_grad(
    params: &PolicyParams,
    batch: &Batch,
    r_target: f64,
) -> Result<GradVector> {
    let j = rollout::estimate_performance(batch);
    let s = sgn(j - r_target);
    Ok(policy_gradient_estimate(params, batch)?.scaled(s))
}

/// Per-state KL gradients averaged over every state visited in the batch.
pub fn kl_gradient_estimate(
    pivot: &PolicyParams,
    params: &PolicyParams,
    batch: &Batch,
) -> Result<GradVector> {
    if pivot.arch != params.arch {
        return Err(Error::ArchMismatch);
    }
    use rayon::prelude::*;
    let partials: Result<Vec<GradVector>> = batch
        .trajectories
        .par_iter()
        .map(|traj| {
            let mut part = GradVector::zeros(params.theta.len());
            for step in &traj.steps {
                let g = policy::grad_kl(pivot, params, &step.obs)?;
                part.add_scaled(&g, 1.0);
            }
            Ok(part)
        })
        .collect();
    let mut grad = GradVector::zeros(params.theta.len());
    for part in partials? {
        grad.add_scaled(&part, 1.0);
    }
    Ok(grad.scaled(1.0 / batch.total_steps() as f64))
}

/// Ascent direction of the KL-penalized surrogate J - lambda * KL(pivot || params).
pub fn trust_region_gradient(
    pivot: &PolicyParams,
    params: &PolicyParams,
    batch: &Batch,
    lambda: f64,
) -> Result<GradVector> {
    let mut g = policy_gradient_estimate(params, batch)?;
    let kl = kl_gradient_estimate(pivot, params, batch)?;
    g.add_scaled(&kl, -lambda);
    Ok(g)
}

/// With the target set above any achievable return the counterfactual
/// descent direction must equal the negated trust-region ascent
/// direction with lambda = k, elementwise, on the shared batch.
pub fn verify_equivalence(
    pivot: &PolicyParams,
    params: &PolicyParams,
    batch: &Batch,
    k: f64,
) -> Result<bool> {
    Ok(equivalence_max_deviation(pivot, params, batch, k)? < 1e-12)
}

/// Max elementwise deviation between the two gradient routes.
pub fn equivalence_max_deviation(
    pivot: &PolicyParams,
    params: &PolicyParams,
    batch: &Batch,
    k: f64,
) -> Result<f64> {
    // Unreachable target: the return penalty sign is forced to -1.
    let r_unreachable = 1e9;
    debug_assert!(rollout::estimate_performance(batch) < r_unreachable);

    let mut descent = return_penalty_grad(params, batch, r_unreachable)?;
    let kl = kl_gradient_estimate(pivot, params, batch)?;
    descent.add_scaled(&kl, k);

    let ascent = trust_region_gradient(pivot, params, batch, k)?;
    let dev = descent
        .values
        .iter()
        .zip(ascent.values.iter())
        .map(|(d, a)| (d + a).abs())
        .fold(0.0, f64::max);
    Ok(dev)
}

/// The full optimization loop: plain gradient descent on the penalized
/// objective, with the KL pivot replaced by the current parameters after
/// every `m` inner steps, stopping as soon as the batch estimate lands
/// within `delta` of the target.
pub fn counterpol_optimize(
    pivot0: &PolicyParams,
    spec: &EnvSpec,
    cfg: &CounterpolConfig,
) -> Result<(PolicyParams, RunLog)> {
    if pivot0.arch.obs_dim != spec.obs_dim {
        return Err(Error::ObsDimMismatch { got: pivot0.arch.obs_dim, expected: spec.obs_dim });
    }
    let mut params = pivot0.clone();
    let mut pivot = pivot0.clone();
    let mut log = RunLog {
        records: Vec::new(),
        status: RunStatus::MaxItersExceeded,
        n_outer_updates: 0,
        n_inner_steps: 0,
        total_episodes: 0,
    };

    'outer: for outer in 0..cfg.max_outer_iters {
        for inner in 0..cfg.m {
            // Fresh on-policy batch per update; seed block is disjoint
            // across steps so episodes never repeat.
            let base_seed = cfg
                .seed
                .wrapping_add((log.n_inner_steps as u64).wrapping_mul(cfg.n_episodes as u64));
            let batch =
                rollout::sample_episodes(spec, &params, cfg.n_episodes, base_seed, cfg.gamma)?;
            log.total_episodes += cfg.n_episodes;

            let j = rollout::estimate_performance(&batch);
            let kl = rollout::estimate_kl(&pivot, &params, &batch)?;
            let penalty = (j - cfg.r_target).abs();

            if penalty < cfg.delta {
                log.records.push(UpdateRecord {
                    outer_iter: outer,
                    inner_step: inner,
                    j_estimate: j,
                    kl_estimate: kl,
                    return_penalty: penalty,
                    grad_norm: 0.0,
                    pivot_updated: false,
                });
                log.status = RunStatus::Converged;
                break 'outer;
            }

            let mut grad = return_penalty_grad(&params, &batch, cfg.r_target)?;
            let kl_grad = kl_gradient_estimate(&pivot, &params, &batch)?;
            grad.add_scaled(&kl_grad, cfg.k);

            if !grad.is_finite() {
                log.status = RunStatus::NonFiniteGradient;
                break 'outer;
            }

            let grad_norm = grad.norm();
            for (p, g) in params.theta.iter_mut().zip(grad.values.iter()) {
                *p -= cfg.eta * g;
            }
            log.n_inner_steps += 1;
            log.records.push(UpdateRecord {
                outer_iter: outer,
                inner_step: inner,
                j_estimate: j,
                kl_estimate: kl,
                return_penalty: penalty,
                grad_norm,
                pivot_updated: inner + 1 == cfg.m,
            });
        }
        pivot = params.clone();
        log.n_outer_updates += 1;
    }

    if log.status == RunStatus::NonFiniteGradient {
        return Err(Error::NonFiniteGradient);
    }
    Ok((params, log))
}
