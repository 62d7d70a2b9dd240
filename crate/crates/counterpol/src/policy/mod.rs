//! Feed-forward policies with categorical or Gaussian heads: exact
//! log-probabilities, closed-form KL divergences, and hand-written
//! reverse-mode gradients of both with respect to the flat parameter
//! vector. No autodiff framework; correctness is pinned by finite
//! differences in the tests.

pub(crate) mod net;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::envs::Action;
use crate::error::{Error, Result};
use net::MlpShape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Head {
    Categorical { n_actions: usize },
    /// Mean from the network; a state-independent global log-std per
    /// action dimension lives at the tail of theta.
    Gaussian { action_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyArch {
    pub obs_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub head: Head,
}

impl PolicyArch {
    pub fn new(obs_dim: usize, hidden_sizes: Vec<usize>, head: Head) -> Self {
        assert!(!hidden_sizes.is_empty(), "hidden_sizes must be non-empty");
        PolicyArch { obs_dim, hidden_sizes, head }
    }

    /// Two tanh layers of 64 units.
    pub fn default_for(obs_dim: usize, head: Head) -> Self {
        Self::new(obs_dim, vec![64, 64], head)
    }

    pub(crate) fn mlp_shape(&self) -> MlpShape {
        let out = match &self.head {
            Head::Categorical { n_actions } => *n_actions,
            Head::Gaussian { action_dim } => *action_dim,
        };
        MlpShape::new(self.obs_dim, &self.hidden_sizes, out)
    }

    pub fn param_count(&self) -> usize {
        let extra = match &self.head {
            Head::Categorical { .. } => 0,
            Head::Gaussian { action_dim } => *action_dim,
        };
        self.mlp_shape().param_count() + extra
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub arch: PolicyArch,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    fn log_std_slice(&self) -> &[f64] {
        let mlp = self.arch.mlp_shape().param_count();
        &self.theta[mlp..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyDistribution {
    Categorical { probs: Vec<f64> },
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
}

/// Gradient aligned with `PolicyParams::theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradVector {
    pub values: Vec<f64>,
}

impl GradVector {
    pub fn zeros(len: usize) -> Self {
        GradVector { values: vec![0.0; len] }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for v in &mut self.values {
            *v *= s;
        }
        self
    }

    pub fn add_scaled(&mut self, other: &GradVector, s: f64) {
        for (a, b) in self.values.iter_mut().zip(other.values.iter()) {
            *a += s * b;
        }
    }
}

/// Seeded initialization: uniform fan-in-scaled weights, zero biases,
/// Gaussian global log-std starts at 0 (std = 1).
pub fn init_params(arch: &PolicyArch, seed: u64) -> PolicyParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = net::init_theta(&arch.mlp_shape(), &mut rng);
    if let Head::Gaussian { action_dim } = &arch.head {
        theta.extend(std::iter::repeat(0.0).take(*action_dim));
    }
    PolicyParams { arch: arch.clone(), theta }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn forward(params: &PolicyParams, obs: &[f64]) -> Result<PolicyDistribution> {
    if obs.len() != params.arch.obs_dim {
        return Err(Error::ObsDimMismatch { got: obs.len(), expected: params.arch.obs_dim });
    }
    if obs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteObs);
    }
    let shape = params.arch.mlp_shape();
    let cache = net::forward(&shape, &params.theta, obs);
    let out = cache.output();
    Ok(match &params.arch.head {
        Head::Categorical { .. } => PolicyDistribution::Categorical { probs: softmax(out) },
        Head::Gaussian { .. } => PolicyDistribution::Gaussian {
            mean: out.to_vec(),
            std: params.log_std_slice().iter().map(|ls| ls.exp()).collect(),
        },
    })
}

/// Draw an action; Gaussian samples are the raw mean + std * z, clipping
/// to the action box happens at the environment boundary.
pub fn sample(dist: &PolicyDistribution, rng: &mut impl Rng) -> Action {
    match dist {
        PolicyDistribution::Categorical { probs } => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Action::Discrete(i);
                }
            }
            Action::Discrete(probs.len() - 1)
        }
        PolicyDistribution::Gaussian { mean, std } => {
            let v = mean
                .iter()
                .zip(std.iter())
                .map(|(m, s)| {
                    let z: f64 = standard_normal(rng);
                    m + s * z
                })
                .collect();
            Action::Continuous(v)
        }
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple.
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

const LN_2PI: f64 = 1.8378770664093453;

pub fn log_prob(dist: &PolicyDistribution, action: &Action) -> Result<f64> {
    match (dist, action) {
        (PolicyDistribution::Categorical { probs }, Action::Discrete(a)) => {
            if *a >= probs.len() {
                return Err(Error::InvalidAction { got: *a, n: probs.len() });
            }
            Ok(probs[*a].ln())
        }
        (PolicyDistribution::Gaussian { mean, std }, Action::Continuous(a)) => {
            let mut lp = 0.0;
            for i in 0..mean.len() {
                let z = (a[i] - mean[i]) / std[i];
                lp += -0.5 * z * z - std[i].ln() - 0.5 * LN_2PI;
            }
            Ok(lp)
        }
        _ => Err(Error::HeadMismatch),
    }
}

/// KL(dist0 || dist1), closed form per head type. Non-negative.
pub fn kl_divergence(dist0: &PolicyDistribution, dist1: &PolicyDistribution) -> Result<f64> {
    match (dist0, dist1) {
        (
            PolicyDistribution::Categorical { probs: p0 },
            PolicyDistribution::Categorical { probs: p1 },
        ) => {
            if p0.len() != p1.len() {
                return Err(Error::HeadMismatch);
            }
            let mut kl = 0.0;
            for (a, b) in p0.iter().zip(p1.iter()) {
                if *a > 0.0 {
                    kl += a * (a.ln() - b.ln());
                }
            }
            Ok(kl.max(0.0))
        }
        (
            PolicyDistribution::Gaussian { mean: m0, std: s0 },
            PolicyDistribution::Gaussian { mean: m1, std: s1 },
        ) => {
            if m0.len() != m1.len() {
                return Err(Error::HeadMismatch);
            }
            let mut kl = 0.0;
            for i in 0..m0.len() {
                let dm = m0[i] - m1[i];
                kl += (s1[i] / s0[i]).ln()
                    + (s0[i] * s0[i] + dm * dm) / (2.0 * s1[i] * s1[i])
                    - 0.5;
            }
            Ok(kl.max(0.0))
        }
        _ => Err(Error::HeadMismatch),
    }
}

/// Exact gradient of `log_prob(forward(params, obs), action)` w.r.t. theta.
pub fn grad_log_prob(params: &PolicyParams, obs: &[f64], action: &Action) -> Result<GradVector> {
    let shape = params.arch.mlp_shape();
    let cache = net::forward(&shape, &params.theta, obs);
    let out = cache.output();
    let mut grad = GradVector::zeros(params.theta.len());

    let d_out = match (&params.arch.head, action) {
        (Head::Categorical { n_actions }, Action::Discrete(a)) => {
            if *a >= *n_actions {
                return Err(Error::InvalidAction { got: *a, n: *n_actions });
            }
            // d log softmax(z)[a] / dz_i = 1{i=a} - p_i
            let probs = softmax(out);
            let mut d: Vec<f64> = probs.iter().map(|p| -p).collect();
            d[*a] += 1.0;
            d
        }
        (Head::Gaussian { action_dim }, Action::Continuous(a)) => {
            let log_std = params.log_std_slice();
            let mlp_len = shape.param_count();
            let mut d = Vec::with_capacity(*action_dim);
            for i in 0..*action_dim {
                let s = log_std[i].exp();
                let z = (a[i] - out[i]) / s;
                // d/d mean_i and d/d log_std_i of the diagonal normal log-density
                d.push(z / s);
                grad.values[mlp_len + i] = z * z - 1.0;
            }
            d
        }
        _ => return Err(Error::HeadMismatch),
    };

    net::backward(&shape, &params.theta, &cache, &d_out, &mut grad.values);
    Ok(grad)
}

/// Exact gradient w.r.t. `params` (pivot held constant) of
/// `kl_divergence(forward(pivot, obs), forward(params, obs))`.
pub fn grad_kl(pivot: &PolicyParams, params: &PolicyParams, obs: &[f64]) -> Result<GradVector> {
    if pivot.arch != params.arch {
        return Err(Error::ArchMismatch);
    }
    let shape = params.arch.mlp_shape();
    let pivot_cache = net::forward(&shape, &pivot.theta, obs);
    let cache = net::forward(&shape, &params.theta, obs);
    let mut grad = GradVector::zeros(params.theta.len());

    let d_out = match &params.arch.head {
        Head::Categorical { .. } => {
            // d KL(p0 || softmax(z1)) / dz1_i = p1_i - p0_i
            let p0 = softmax(pivot_cache.output());
            let p1 = softmax(cache.output());
            p1.iter().zip(p0.iter()).map(|(a, b)| a - b).collect::<Vec<f64>>()
        }
        Head::Gaussian { action_dim } => {
            let m0 = pivot_cache.output();
            let m1 = cache.output();
            let s0: Vec<f64> = pivot.log_std_slice().iter().map(|l| l.exp()).collect();
            let s1: Vec<f64> = params.log_std_slice().iter().map(|l| l.exp()).collect();
            let mlp_len = shape.param_count();
            let mut d = Vec::with_capacity(*action_dim);
            for i in 0..*action_dim {
                let dm = m1[i] - m0[i];
                let var1 = s1[i] * s1[i];
                d.push(dm / var1);
                let dm0 = m0[i] - m1[i];
                grad.values[mlp_len + i] = 1.0 - (s0[i] * s0[i] + dm0 * dm0) / var1;
            }
            d
        }
    };

    net::backward(&shape, &params.theta, &cache, &d_out, &mut grad.values);
    Ok(grad)
}
