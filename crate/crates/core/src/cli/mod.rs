//! Command-line front end: scenario presets, config loading, and the
//! `train`, `test`, `compare`, `render-demo` and `list-scenarios` subcommands.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

pub use config::{
    parse_table, read_table, scenario, scenarios, ConfigFile, ProfileName, RunConfig, Scenario,
    DEFAULT_BASE_SEED, EFFECTIVE_CONFIG_FILE,
};

use crate::agents::{Agent, AgentConfig, AgentVariant, ExplorationSchedule, ObservationScale};
use crate::env::Environment;
use crate::harness::{self, EvalReport, TrainSchedule};

pub const SEED_ENV_VAR: &str = "AMBULANCE_RL_SEED";

#[derive(Debug, Parser)]
#[command(name = "ambulance-rl", version, about = "Ambulance dispatch simulation and Deep Q-learning agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and checkpoint its best policy.
    Train(TrainArgs),
    /// Run greedy test episodes for a checkpoint or the random baseline.
    Test(TestArgs),
    /// Tabulate test results against the random baseline.
    Compare(CompareArgs),
    /// Print the simulation state while a random policy runs.
    RenderDemo(RenderArgs),
    /// Show the built-in scenario presets.
    ListScenarios,
}

/// Options shared by every subcommand that builds a run configuration.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat TOML config file; explicit flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario preset (see `list-scenarios`).
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub agent: Option<AgentVariant>,
    /// 30-day episodes, 15 training (5 random), 10 test runs.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, env = SEED_ENV_VAR)]
    pub seed: Option<u64>,
    /// Override the episode length in days.
    #[arg(long)]
    pub days: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Parent of the timestamped run directory.
    #[arg(long, default_value = "runs")]
    pub out_root: PathBuf,
    /// Record per-episode wall-clock seconds (makes history files differ between reruns).
    #[arg(long)]
    pub wall_clock: bool,
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Checkpoint directory written by `train`; its run's effective config is reused.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, default_value = "runs")]
    pub out_root: PathBuf,
    #[arg(long)]
    pub wall_clock: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Directories holding `eval.csv` and `summary.json`.
    #[arg(required = true, num_args = 2..)]
    pub results: Vec<PathBuf>,
    #[arg(long, default_value = "runs")]
    pub out_root: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long, default_value = "scenario1")]
    pub scenario: String,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long, env = SEED_ENV_VAR, default_value_t = DEFAULT_BASE_SEED)]
    pub seed: u64,
}

/// Parse `args` (program name first) and run the chosen subcommand.
pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::parse_from(args).command {
        Command::Train(a) => cmd_train(a),
        Command::Test(a) => cmd_test(a),
        Command::Compare(a) => cmd_compare(a),
        Command::RenderDemo(a) => cmd_render(a),
        Command::ListScenarios => {
            for s in scenarios() {
                println!(
                    "{:<10} {} ({} areas, {} ambulances, {} dispatch points)",
                    s.name, s.description, s.sim.n_incident_areas, s.sim.n_ambulances, s.sim.n_dispatch_points
                );
            }
            Ok(())
        }
    }
}

/// Start from `base` (a file's keys or a previous run's), then apply flags.
fn layered_config(base: toml::Table, args: &ConfigArgs, extra: toml::Table) -> anyhow::Result<RunConfig> {
    let mut table = base;
    if let Some(path) = &args.config {
        table.extend(read_table(path)?);
    }
    if let Some(s) = &args.scenario {
        table.insert("preset".into(), s.clone().into());
    }
    if let Some(a) = args.agent {
        table.insert("agent".into(), a.name().into());
    }
    if args.fast {
        // a profile only seeds defaults, so explicit counts from earlier layers must go
        for key in ["train_episodes", "warmup_episodes", "test_runs", "episode_duration_days", "epsilon_decay_per_episode"] {
            table.remove(key);
        }
        table.insert("profile".into(), "fast".into());
    }
    if let Some(seed) = args.seed {
        table.insert("base_seed".into(), toml::Value::Integer(seed as i64));
        table.remove("agent_seed");
    }
    if let Some(days) = args.days {
        table.insert("episode_duration_days".into(), toml::Value::Integer(days.into()));
    }
    table.extend(extra);
    Ok(RunConfig::resolve(&parse_table(table)?)?)
}

/// Create `<root>/<timestamp>-<hash>`, adding a suffix if that name is taken.
fn create_run_dir(root: &Path, hash: &str) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{stamp}-{hash}");
    for i in 0.. {
        let name = if i == 0 { base.clone() } else { format!("{base}-{i}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!()
}

fn count(n: usize) -> toml::Value {
    toml::Value::Integer(n as i64)
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let mut extra = toml::Table::new();
    if let Some(n) = args.episodes {
        extra.insert("train_episodes".into(), count(n));
    }
    if let Some(n) = args.warmup {
        extra.insert("warmup_episodes".into(), count(n));
    }
    let cfg = layered_config(toml::Table::new(), &args.config, extra)?;
    let dir = create_run_dir(&args.out_root, &cfg.hash())?;
    cfg.write_effective(&dir)?;

    let mut env = Environment::new(cfg.sim.clone())?;
    let mut agent = Agent::new(cfg.agent.clone(), ObservationScale::from_config(&cfg.sim))?;
    let mut schedule = TrainSchedule::from_profile(&cfg.profile, cfg.base_seed);
    schedule.record_wall_clock = args.wall_clock;
    let quiet = args.quiet;
    let variant = cfg.agent.variant;
    let outcome = harness::train(&mut env, &mut agent, &schedule, &dir, |r| {
        if !quiet {
            eprintln!(
                "{variant} episode {:>3}: reward {:>14.1}  call-to-arrival {:>6.2} min  eps {:.3}",
                r.episode, r.total_reward, r.mean_call_to_arrival, r.epsilon
            );
        }
    })?;
    match outcome.best_episode {
        Some(ep) => eprintln!("best episode {ep} (total reward {:.1})", outcome.best_total_reward.unwrap_or(f64::NAN)),
        None => eprintln!("no learning episodes; nothing checkpointed"),
    }
    println!("{}", dir.display());
    Ok(())
}

fn cmd_test(args: TestArgs) -> anyhow::Result<()> {
    let mut base = toml::Table::new();
    if let Some(ckpt) = &args.checkpoint {
        let effective = ckpt
            .parent()
            .map(|p| p.join(EFFECTIVE_CONFIG_FILE))
            .filter(|p| p.exists());
        match effective {
            Some(path) => base = read_table(&path)?,
            None if args.config.config.is_none() && args.config.scenario.is_none() => {
                bail!(
                    "no {EFFECTIVE_CONFIG_FILE} next to {}; pass --config or --scenario",
                    ckpt.display()
                )
            }
            None => {}
        }
    }
    let mut extra = toml::Table::new();
    if let Some(n) = args.runs {
        extra.insert("test_runs".into(), count(n));
    }
    let cfg = layered_config(base, &args.config, extra)?;
    let env = Environment::new(cfg.sim.clone())?;

    let agent = match &args.checkpoint {
        Some(ckpt) => {
            let (agent, manifest) = Agent::load_checkpoint(ckpt)
                .with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
            eprintln!("loaded {} from episode {}", manifest.variant, manifest.episode);
            agent
        }
        None if cfg.agent.variant == AgentVariant::Random => {
            Agent::new(cfg.agent.clone(), ObservationScale::from_config(&cfg.sim))?
        }
        None => bail!("--checkpoint is required for agent {}", cfg.agent.variant),
    };
    let variant = agent.config().variant;

    let seeds = harness::evaluation_seeds(cfg.base_seed, cfg.profile.test_runs);
    let records = harness::evaluate(&env, &agent, &seeds, args.wall_clock)?;
    let report = EvalReport::new(variant.name(), cfg.scenario.clone(), seeds, records)?;

    let dir = create_run_dir(&args.out_root, &cfg.hash())?;
    cfg.write_effective(&dir)?;
    report.write(&dir)?;
    let b = &report.summary.call_to_arrival;
    eprintln!(
        "{variant} on {}: call-to-arrival median {:.2} min (q1 {:.2}, q3 {:.2}) over {} runs",
        report.scenario, b.median, b.q1, b.q3, report.summary.n_runs
    );
    println!("{}", dir.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<()> {
    let reports = args
        .results
        .iter()
        .map(|d| EvalReport::read(d).with_context(|| format!("reading results in {}", d.display())))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let table = harness::compare(&reports)?;
    print!("{table}");

    let mut hasher = Sha256::new();
    for d in &args.results {
        hasher.update(d.to_string_lossy().as_bytes());
    }
    let dir = create_run_dir(&args.out_root, &hex::encode(&hasher.finalize()[..4]))?;
    let csv_path = dir.join("comparison.csv");
    table.write_csv(std::fs::File::create(&csv_path).with_context(|| csv_path.display().to_string())?)?;
    let json_path = dir.join("comparison.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&table)?)
        .with_context(|| json_path.display().to_string())?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_render(args: RenderArgs) -> anyhow::Result<()> {
    let cfg = scenario(&args.scenario)?.sim;
    let mut env = Environment::new(cfg.clone())?;
    let mut agent = Agent::new(
        AgentConfig::new(AgentVariant::Random, ExplorationSchedule::for_horizon(0, 1, 1.0, 1.0, false)),
        ObservationScale::from_config(&cfg),
    )?;
    env.reset(args.seed);
    print!("{}", env.render());
    for _ in 0..args.steps {
        let action = agent.random_action();
        let r = env.step(action)?;
        println!("-- dispatched to point {action}, reward {:.1}", r.reward);
        print!("{}", env.render());
        if r.terminal {
            break;
        }
    }
    Ok(())
}
