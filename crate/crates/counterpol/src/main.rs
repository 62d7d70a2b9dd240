use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use counterpol::counterfactual::{CounterpolConfig, RunStatus};
use counterpol::envs::{EnvId, EnvSpec};
use counterpol::experiment::{self, EVAL_EPISODES};
use counterpol::persist::{self, Checkpoint, ExperimentConfig, RunSummary};
use counterpol::policy::PolicyParams;
use counterpol::trainer::{self, TrainerConfig};
use counterpol::{rollout, Result};

#[derive(Parser)]
#[command(name = "counterpol", version, about = "Counterfactual explanation policies for classic-control RL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train baseline policies and snapshot checkpoints at return levels
    Train(TrainArgs),
    /// Generate a counterfactual policy for a target return
    Counterfactual(CfArgs),
    /// Evaluate a checkpoint over fresh episodes
    Eval(EvalArgs),
    /// Check the trust-region gradient identity on random draws
    VerifyEquivalence(VerifyArgs),
    /// Run the full checkpoint x target x seed grid and emit a CSV
    ReproduceTable1(TableArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    env: String,
    /// Return levels at which to snapshot (defaults per environment)
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
    levels: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    eta_policy: Option<f64>,
    #[arg(long)]
    eta_value: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Log rolling return every N updates
    #[arg(long, default_value_t = 0)]
    progress: usize,
}

#[derive(Args)]
struct CfArgs {
    #[arg(long)]
    env: String,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    target: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    env: String,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = EVAL_EPISODES)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a per-step rollout trace CSV here
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    env: String,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    k: f64,
    #[arg(long, default_value_t = 50)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    env: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse checkpoints from a previous `train --out DIR` run
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Target returns (defaults per environment)
    #[arg(long, num_args = 1.., value_delimiter = ',', allow_negative_numbers = true)]
    targets: Option<Vec<f64>>,
    /// Optimization seeds, one cell per seed
    #[arg(long, num_args = 1.., value_delimiter = ',', default_values_t = [0u64, 1, 2])]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
}

fn out_root() -> PathBuf {
    std::env::var_os("COUNTERPOL_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

fn default_targets(id: EnvId) -> Vec<f64> {
    match id {
        EnvId::CartPole => vec![50.0, 250.0, 450.0],
        EnvId::Acrobot => vec![-120.0, -100.0, -80.0],
        EnvId::Pendulum => vec![-1000.0, -750.0, -500.0],
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Counterfactual(args) => cmd_counterfactual(args),
        Command::Eval(args) => cmd_eval(args),
        Command::VerifyEquivalence(args) => cmd_verify(args),
        Command::ReproduceTable1(args) => cmd_table(args),
    }
}

fn checkpoint_meta(achieved_j: f64, seed: u64, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    meta.insert("achieved_J".to_string(), format!("{achieved_j}"));
    meta.insert("seed".to_string(), seed.to_string());
    meta.insert(
        "created_by".to_string(),
        format!("counterpol-cli/{}", env!("CARGO_PKG_VERSION")),
    );
    for (k, v) in extra {
        meta.insert(k.to_string(), v.clone());
    }
    meta
}

fn train_checkpoints(
    spec: &EnvSpec,
    cfg: &TrainerConfig,
    out_dir: &Path,
) -> Result<Vec<(PolicyParams, f64)>> {
    let outcome = trainer::train_baseline(spec, cfg)?;
    for level in &outcome.missed_levels {
        eprintln!("warning: level {level} not reached within {} updates", cfg.total_updates);
    }
    std::fs::create_dir_all(out_dir)?;
    let mut result = Vec::new();
    for ck in &outcome.checkpoints {
        let tag = match ck.level {
            Some(level) => format!("level_{level}"),
            None => "final".to_string(),
        };
        let path = out_dir.join(format!("checkpoint_{tag}.txt"));
        let meta = checkpoint_meta(
            ck.achieved_j,
            cfg.seed,
            &[("update_index", ck.update_index.to_string())],
        );
        persist::save_checkpoint(&path, &Checkpoint::new(spec.id.as_str(), &ck.params, meta))?;
        println!(
            "checkpoint {} achieved_J={:.1} update={}",
            path.display(),
            ck.achieved_j,
            ck.update_index
        );
        result.push((ck.params.clone(), ck.achieved_j));
    }
    let resolved = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(out_dir.join("train_config.json"), resolved)?;
    Ok(result)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let spec = EnvSpec::from_id(EnvId::parse(&args.env)?);
    let mut cfg = TrainerConfig::defaults_for(&spec, args.seed);
    if let Some(levels) = args.levels {
        cfg.checkpoint_levels = levels;
    }
    if let Some(updates) = args.updates {
        cfg.total_updates = updates;
    }
    if let Some(eps) = args.episodes {
        cfg.n_episodes_per_update = eps;
    }
    if let Some(eta) = args.eta_policy {
        cfg.eta_policy = eta;
    }
    if let Some(eta) = args.eta_value {
        cfg.eta_value = eta;
    }
    if let Some(gamma) = args.gamma {
        cfg.gamma = gamma;
    }
    cfg.progress_every = args.progress;
    let out_dir = args.out.unwrap_or_else(|| out_root().join(format!("train_{}", args.env)));
    train_checkpoints(&spec, &cfg, &out_dir)?;
    Ok(())
}

fn cmd_counterfactual(args: CfArgs) -> Result<()> {
    let spec = EnvSpec::from_id(EnvId::parse(&args.env)?);
    let ck = persist::load_checkpoint(&args.checkpoint)?;
    let original = ck.params();

    let mut cfg = CounterpolConfig::defaults_for(&spec, args.target, args.seed);
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.n {
        cfg.n_episodes = v;
    }
    if let Some(v) = args.eta {
        cfg.eta = v;
    }
    if let Some(v) = args.max_outer {
        cfg.max_outer_iters = v;
    }

    let out_dir = args
        .out
        .unwrap_or_else(|| out_root().join(format!("cf_{}_{}", args.env, args.target)));
    std::fs::create_dir_all(&out_dir)?;
    let experiment = ExperimentConfig {
        env_id: args.env.clone(),
        checkpoint: args.checkpoint.to_string_lossy().to_string(),
        counterpol: cfg.clone(),
        out_dir: out_dir.to_string_lossy().to_string(),
    };
    experiment.save(&out_dir.join("config.json"))?;

    let started = Instant::now();
    let j0 = ck
        .meta
        .get("achieved_J")
        .and_then(|s| s.parse::<f64>().ok())
        .unwrap_or(f64::NAN);
    let cell = experiment::run_cell(&spec, &original, j0, &cfg)?;

    let mut log_csv = std::fs::File::create(out_dir.join("runlog.csv"))?;
    cell.log.write_csv(&mut log_csv)?;

    let meta = checkpoint_meta(cell.row.j_cf_eval_mean, cfg.seed, &[(
        "r_target",
        format!("{}", cfg.r_target),
    )]);
    persist::save_checkpoint(
        &out_dir.join("counterfactual.txt"),
        &Checkpoint::new(spec.id.as_str(), &cell.counterfactual, meta),
    )?;

    let summary = RunSummary {
        env_id: args.env,
        r_target: cfg.r_target,
        status: format!("{:?}", cell.log.status),
        final_eval_return_mean: cell.row.j_cf_eval_mean,
        final_eval_return_std: cell.row.j_cf_eval_std,
        kl_to_original: cell.row.kl_final,
        n_outer_updates: cell.log.n_outer_updates,
        n_inner_steps: cell.log.n_inner_steps,
        total_episodes: cell.log.total_episodes,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    println!(
        "status={} eval_mean={:.1} eval_std={:.1} kl={:.6} n_outer={} n_inner={}",
        summary.status,
        summary.final_eval_return_mean,
        summary.final_eval_return_std,
        summary.kl_to_original,
        summary.n_outer_updates,
        summary.n_inner_steps
    );
    if cell.log.status != RunStatus::Converged {
        eprintln!("error: optimization did not converge");
        std::process::exit(2);
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let spec = EnvSpec::from_id(EnvId::parse(&args.env)?);
    let ck = persist::load_checkpoint(&args.checkpoint)?;
    let params = ck.params();
    let stats = experiment::evaluate(&spec, &params, args.episodes, args.seed)?;
    if let Some(trace) = args.trace {
        let batch = rollout::sample_episodes(&spec, &params, args.episodes, args.seed, 1.0)?;
        let mut f = std::fs::File::create(trace)?;
        rollout::write_trace_csv(&batch, spec.obs_dim, &mut f)?;
    }
    println!("episodes={} mean={:.2} std={:.2}", args.episodes, stats.mean, stats.std);
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    use rand::Rng;
    use rand::SeedableRng;

    let spec = EnvSpec::from_id(EnvId::parse(&args.env)?);
    let ck = persist::load_checkpoint(&args.checkpoint)?;
    let base = ck.params();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst: f64 = 0.0;
    for draw in 0..args.draws {
        let mut pivot = base.clone();
        let mut params = base.clone();
        for v in &mut pivot.theta {
            *v += rng.gen_range(-0.2..0.2);
        }
        for v in &mut params.theta {
            *v += rng.gen_range(-0.2..0.2);
        }
        let batch = rollout::sample_episodes(&spec, &params, 5, args.seed + draw as u64, 1.0)?;
        let dev = counterpol::counterfactual::equivalence_max_deviation(
            &pivot, &params, &batch, args.k,
        )?;
        worst = worst.max(dev);
    }
    let pass = worst < 1e-12;
    println!(
        "{} max elementwise gradient deviation {worst:.3e} over {} draws",
        if pass { "PASS" } else { "FAIL" },
        args.draws
    );
    if !pass {
        std::process::exit(3);
    }
    Ok(())
}

fn load_checkpoint_set(spec: &EnvSpec, dir: &Path) -> Result<Vec<(PolicyParams, f64)>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("checkpoint_") && n.ends_with(".txt"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    let mut out = Vec::new();
    for path in entries {
        let ck = persist::load_checkpoint(&path)?;
        if ck.env_id != spec.id.as_str() {
            continue;
        }
        let j = ck
            .meta
            .get("achieved_J")
            .and_then(|s| s.parse::<f64>().ok())
            .unwrap_or(f64::NAN);
        out.push((ck.into_params(), j));
    }
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    Ok(out)
}

fn cmd_table(args: TableArgs) -> Result<()> {
    let spec = EnvSpec::from_id(EnvId::parse(&args.env)?);
    let out_dir = args.out.unwrap_or_else(|| out_root().join(format!("table1_{}", args.env)));
    std::fs::create_dir_all(&out_dir)?;

    let checkpoints = match &args.checkpoint_dir {
        Some(dir) => load_checkpoint_set(&spec, dir)?,
        None => {
            let cfg = TrainerConfig::defaults_for(&spec, args.train_seed);
            // Keep the three level snapshots; drop the final policy if
            // all levels were reached.
            let all = train_checkpoints(&spec, &cfg, &out_dir.join("checkpoints"))?;
            if all.len() > 3 { all[..3].to_vec() } else { all }
        }
    };
    if checkpoints.is_empty() {
        return Err(counterpol::Error::CheckpointParse("no checkpoints found".into()));
    }

    let targets = args.targets.unwrap_or_else(|| default_targets(spec.id));
    let results = experiment::run_grid(&spec, &checkpoints, &targets, &args.seeds)?;
    let rows: Vec<_> = results.iter().map(|c| c.row.clone()).collect();

    let csv_path = out_dir.join("table1.csv");
    let mut f = std::fs::File::create(&csv_path)?;
    experiment::write_grid_csv(&rows, &mut f)?;
    println!("wrote {}", csv_path.display());
    for row in &rows {
        println!(
            "env={} J_pi0={:.1} target={} seed={} n_outer={} eval={:.1}±{:.1} kl={:.5} {}",
            row.env,
            row.j_pi0,
            row.r_target,
            row.seed,
            row.n_outer,
            row.j_cf_eval_mean,
            row.j_cf_eval_std,
            row.kl_final,
            if row.converged { "converged" } else { "NOT CONVERGED" }
        );
    }
    Ok(())
}
