//! Text-based checkpoint serialization and experiment configuration
//! files. Checkpoints are line-oriented key-value documents; parameter
//! values are written in Rust's shortest round-trip decimal form, which
//! reparses bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::counterfactual::CounterpolConfig;
use crate::error::{Error, Result};
use crate::policy::{Head, PolicyArch, PolicyParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub env_id: String,
    pub arch: PolicyArch,
    pub theta: Vec<f64>,
    /// Free-form provenance: achieved_J, seed, created_by, etc.
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(env_id: &str, params: &PolicyParams, meta: BTreeMap<String, String>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            env_id: env_id.to_string(),
            arch: params.arch.clone(),
            theta: params.theta.clone(),
            meta,
        }
    }

    pub fn into_params(self) -> PolicyParams {
        PolicyParams { arch: self.arch, theta: self.theta }
    }

    pub fn params(&self) -> PolicyParams {
        PolicyParams { arch: self.arch.clone(), theta: self.theta.clone() }
    }
}

fn head_to_line(head: &Head) -> String {
    match head {
        Head::Categorical { n_actions } => format!("categorical {n_actions}"),
        Head::Gaussian { action_dim } => format!("gaussian {action_dim}"),
    }
}

pub fn save_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "format_version {}", c.format_version)?;
    writeln!(w, "env_id {}", c.env_id)?;
    writeln!(w, "obs_dim {}", c.arch.obs_dim)?;
    let hidden: Vec<String> = c.arch.hidden_sizes.iter().map(|h| h.to_string()).collect();
    writeln!(w, "hidden {}", hidden.join(","))?;
    writeln!(w, "head {}", head_to_line(&c.arch.head))?;
    for (k, v) in &c.meta {
        writeln!(w, "meta {k} {v}")?;
    }
    writeln!(w, "theta_len {}", c.theta.len())?;
    writeln!(w, "theta")?;
    for v in &c.theta {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::CheckpointParse(msg.into())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();

    let mut format_version = None;
    let mut env_id = None;
    let mut obs_dim = None;
    let mut hidden = None;
    let mut head = None;
    let mut theta_len = None;
    let mut meta = BTreeMap::new();

    for line in lines.by_ref() {
        let line = line?;
        let line = line.trim();
        if line == "theta" {
            break;
        }
        let (key, rest) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(format!("malformed line: {line:?}")))?;
        match key {
            "format_version" => {
                format_version =
                    Some(rest.parse::<u32>().map_err(|_| parse_err("bad format_version"))?)
            }
            "env_id" => env_id = Some(rest.to_string()),
            "obs_dim" => {
                obs_dim = Some(rest.parse::<usize>().map_err(|_| parse_err("bad obs_dim"))?)
            }
            "hidden" => {
                let sizes: std::result::Result<Vec<usize>, _> =
                    rest.split(',').map(|s| s.parse::<usize>()).collect();
                hidden = Some(sizes.map_err(|_| parse_err("bad hidden sizes"))?);
            }
            "head" => {
                let (kind, n) =
                    rest.split_once(' ').ok_or_else(|| parse_err("bad head line"))?;
                let n: usize = n.parse().map_err(|_| parse_err("bad head dimension"))?;
                head = Some(match kind {
                    "categorical" => Head::Categorical { n_actions: n },
                    "gaussian" => Head::Gaussian { action_dim: n },
                    other => return Err(parse_err(format!("unknown head kind {other:?}"))),
                });
            }
            "meta" => {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.insert(k.to_string(), v.to_string());
            }
            "theta_len" => {
                theta_len = Some(rest.parse::<usize>().map_err(|_| parse_err("bad theta_len"))?)
            }
            other => return Err(parse_err(format!("unknown key {other:?}"))),
        }
    }

    let format_version = format_version.ok_or_else(|| parse_err("missing format_version"))?;
    if format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(format_version));
    }
    let env_id = env_id.ok_or_else(|| parse_err("missing env_id"))?;
    let arch = PolicyArch::new(
        obs_dim.ok_or_else(|| parse_err("missing obs_dim"))?,
        hidden.ok_or_else(|| parse_err("missing hidden"))?,
        head.ok_or_else(|| parse_err("missing head"))?,
    );
    let theta_len = theta_len.ok_or_else(|| parse_err("missing theta_len"))?;

    let mut theta = Vec::with_capacity(theta_len);
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        theta.push(line.parse::<f64>().map_err(|_| parse_err("bad theta value"))?);
    }
    if theta.len() != theta_len {
        return Err(parse_err(format!(
            "theta_len says {theta_len} but {} values present",
            theta.len()
        )));
    }
    if theta.len() != arch.param_count() {
        return Err(Error::ParamLenMismatch { got: theta.len(), expected: arch.param_count() });
    }
    Ok(Checkpoint { format_version, env_id, arch, theta, meta })
}

/// A full experiment description: which checkpoint to explain, the
/// optimization settings, and where results go. Written next to every
/// run's outputs with all defaults materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env_id: String,
    pub checkpoint: String,
    pub counterpol: CounterpolConfig,
    pub out_dir: String,
}

impl ExperimentConfig {
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let json = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| parse_err(format!("bad config: {e}")))?;
        if !Path::new(&cfg.checkpoint).exists() {
            return Err(parse_err(format!("checkpoint file {:?} does not exist", cfg.checkpoint)));
        }
        Ok(cfg)
    }
}

/// JSON summary written after a counterfactual run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub env_id: String,
    pub r_target: f64,
    pub status: String,
    pub final_eval_return_mean: f64,
    pub final_eval_return_std: f64,
    pub kl_to_original: f64,
    pub n_outer_updates: usize,
    pub n_inner_steps: usize,
    pub total_episodes: usize,
    pub wall_time_secs: f64,
}
