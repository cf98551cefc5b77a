//! Command-line front end: argument parsing, config layering and run directories.
//!
//! Every subcommand loads a [`RunConfig`] (defaults when `--config` is absent), applies
//! the command-line overrides, validates the result and only then touches the output
//! location. Log verbosity comes from the `FORTATTACK_LOG` environment variable
//! (`error`, `warn`, `info`, `debug`, `trace`; default `warn`).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::curriculum::{ensemble_train, evaluate_matchup, MatchupReport, OpponentLibrary, StrategySnapshot};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::ppo::{train, Controller, RunFiles, TrainReport};
use crate::replay::{read_trajectory, record_episode, render_frames, write_trajectory, RenderStyle};

pub const LOG_ENV: &str = "FORTATTACK_LOG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_FORMAT: i32 = 5;
pub const EXIT_INTERNAL: i32 = 6;

/// Process exit code for an error class.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::Numerical(_) | Error::PoisonedUpdate { .. } | Error::EmptySupport => EXIT_NUMERICAL,
        Error::Format { .. } => EXIT_FORMAT,
        Error::Dimension(_) | Error::Usage(_) | Error::Contract(_) => EXIT_INTERNAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "fortattack", version, about = "FortAttack self-play training, evaluation and replay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train guards and attackers against each other.
    Train {
        #[command(flatten)]
        common: Common,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one team against a frozen library of opponent snapshots.
    Ensemble {
        #[command(flatten)]
        common: Common,
        /// Library manifest (a `library.toml` written by `train`).
        #[arg(long)]
        library: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Play a batch of episodes between two controllers and report win-rates.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Guard controller: a checkpoint path, `scripted` or `random`.
        #[arg(long)]
        guard: String,
        /// Attacker controller: a checkpoint path, `scripted` or `random`.
        #[arg(long)]
        attacker: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Report file (JSON); printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record one episode as a trajectory file.
    Record {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        guard: String,
        #[arg(long)]
        attacker: String,
        /// Agent whose attention weights are stored; defaults to the first guard.
        #[arg(long)]
        focus_agent: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a trajectory file to PNG frames plus `index.tsv`.
    Render {
        /// Render style from the `[render]` table.
        #[arg(long)]
        config: Option<PathBuf>,
        /// A bare render-style TOML file; takes precedence over `--config`.
        #[arg(long)]
        style: Option<PathBuf>,
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a config and print it with every default filled in.
    CheckConfig {
        #[command(flatten)]
        common: Common,
    },
}

/// Config file plus the flags that override it.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Run config TOML; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `env.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `train.workers`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overrides `train.iterations`.
    #[arg(long)]
    pub iterations: Option<usize>,
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.env.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.train.workers = w;
        }
        if let Some(n) = self.iterations {
            cfg.train.iterations = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Relative locations of everything in a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLayout {
    pub config: PathBuf,
    pub curve: PathBuf,
    pub smoothed_curve: PathBuf,
    pub stats: PathBuf,
    pub checkpoints: PathBuf,
    pub library: PathBuf,
}

impl Default for RunLayout {
    fn default() -> Self {
        RunLayout {
            config: "config.toml".into(),
            curve: "curve.tsv".into(),
            smoothed_curve: "curve_smoothed.tsv".into(),
            stats: "stats.jsonl".into(),
            checkpoints: "checkpoints".into(),
            library: "library.toml".into(),
        }
    }
}

/// `manifest.toml` of a run directory. `config.toml` next to it holds the same resolved
/// config, so `--config <run>/config.toml` repeats the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub seed: u64,
    /// Library manifest used by an ensemble run.
    pub library: Option<PathBuf>,
    pub layout: RunLayout,
    pub checkpoint: Vec<StrategySnapshot>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format("run manifest", e.message().to_string()))
    }
}

fn start_run(out: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(RunLayout::default().config);
    std::fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))
}

fn finish_run(out: &Path, command: &str, cfg: &RunConfig, library: Option<&Path>, report: &TrainReport) -> Result<()> {
    let manifest = RunManifest {
        run_id: out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into()),
        command: command.into(),
        seed: cfg.env.seed,
        library: library.map(Path::to_path_buf),
        layout: RunLayout::default(),
        checkpoint: report.snapshots.clone(),
        config: cfg.clone(),
    };
    let path = out.join("manifest.toml");
    let text = toml::to_string(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// `scripted`, `random`, or a checkpoint path.
pub fn parse_controller(name: &str, cfg: &RunConfig) -> Result<Controller> {
    match name {
        "scripted" => Ok(Controller::Scripted(cfg.scripted)),
        "random" => Ok(Controller::Random),
        path => Ok(Controller::policy(PolicyParams::load(Path::new(path))?)),
    }
}

fn cmd_train(common: &Common, out: &Path) -> Result<()> {
    let cfg = common.resolve()?;
    start_run(out, &cfg)?;
    let report = train(&cfg, Some(out))?;
    finish_run(out, "train", &cfg, None, &report)?;
    println!("{}", RunFiles { root: out.to_path_buf() }.curve().display());
    Ok(())
}

fn cmd_ensemble(common: &Common, library: &Path, out: &Path) -> Result<()> {
    let cfg = common.resolve()?;
    let team = cfg.ensemble.team;
    let lib = OpponentLibrary::load(library, team.opponent())?;
    let init = cfg.ensemble.init_checkpoint.as_deref().map(PolicyParams::load).transpose()?;
    start_run(out, &cfg)?;
    let report = ensemble_train(&cfg, team, &lib, init, Some(out))?;
    finish_run(out, "ensemble", &cfg, Some(library), &report)?;
    println!("{}", RunFiles { root: out.to_path_buf() }.curve().display());
    Ok(())
}

/// Runs the `eval` workflow and returns its report.
pub fn eval_report(cfg: &RunConfig, guard: &str, attacker: &str, episodes: usize) -> Result<MatchupReport> {
    if cfg.env.n_guards == 0 || cfg.env.n_attackers == 0 {
        return Err(Error::config("env.n_guards", "evaluation needs at least one agent per team"));
    }
    let g = parse_controller(guard, cfg)?;
    let a = parse_controller(attacker, cfg)?;
    evaluate_matchup(&cfg.env, &cfg.reward, &g, &a, episodes, cfg.env.seed)
}

fn cmd_eval(common: &Common, guard: &str, attacker: &str, episodes: usize, out: Option<&Path>) -> Result<()> {
    let cfg = common.resolve()?;
    let report = eval_report(&cfg, guard, attacker, episodes)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))?,
        None => println!("{text}"),
    }
    log::info!("guard win-rate {:.3} over {} episodes", report.win_rate, report.episodes);
    Ok(())
}

fn cmd_record(common: &Common, guard: &str, attacker: &str, focus: Option<usize>, out: &Path) -> Result<()> {
    let cfg = common.resolve()?;
    let g = parse_controller(guard, &cfg)?;
    let a = parse_controller(attacker, &cfg)?;
    let mut rec = record_episode(&cfg.env, &cfg.reward, &g, &a, cfg.env.seed, focus)?;
    rec.header.guard = guard.into();
    rec.header.attacker = attacker.into();
    write_trajectory(out, &rec)?;
    log::info!("recorded {} steps to {}", rec.steps.len(), out.display());
    Ok(())
}

fn cmd_render(config: Option<&Path>, style: Option<&Path>, trajectory: &Path, out: &Path) -> Result<()> {
    let style = match (style, config) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let s: RenderStyle = toml::from_str(&text).map_err(|e| Error::config("render", e.message().to_string()))?;
            s.validate()?;
            s
        }
        (None, Some(path)) => RunConfig::load(path)?.render,
        (None, None) => RenderStyle::default(),
    };
    match read_trajectory(trajectory)? {
        Some(rec) => {
            let frames = render_frames(&rec, &style, out)?;
            log::info!("wrote {} frames to {}", frames.len(), out.display());
        }
        None => {
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let index = out.join("index.tsv");
            std::fs::write(&index, "frame\tt\tfile\n").map_err(|e| Error::io(&index, e))?;
        }
    }
    Ok(())
}

fn cmd_check(common: &Common) -> Result<()> {
    let cfg = common.resolve()?;
    print!("{}", cfg.to_toml());
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train { common, out } => cmd_train(common, out),
        Command::Ensemble { common, library, out } => cmd_ensemble(common, library, out),
        Command::Eval { common, guard, attacker, episodes, out } => cmd_eval(common, guard, attacker, *episodes, out.as_deref()),
        Command::Record { common, guard, attacker, focus_agent, out } => cmd_record(common, guard, attacker, *focus_agent, out),
        Command::Render { config, style, trajectory, out } => cmd_render(config.as_deref(), style.as_deref(), trajectory, out),
        Command::CheckConfig { common } => cmd_check(common),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
