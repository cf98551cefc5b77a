use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::scheduled_learning_rate;
use super::controller::Controller;
use super::rollout::{collect_rollouts, Role, Rollout, RolloutWorker};
use super::update::{ppo_update, TrainStats};
use crate::config::RunConfig;
use crate::curriculum::{detect_extrema, OpponentLibrary, StrategySnapshot};
use crate::env::TeamId;
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::policy::PolicyParams;
use crate::replay::smooth_curve;

const INIT_STREAM: u64 = 1 << 40;
const UPDATE_STREAM: u64 = 1 << 41;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Learned,
    Scripted,
    Random,
}

/// Training-loop settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub iterations: usize,
    /// Rollout workers; each owns one environment and random stream.
    pub workers: usize,
    /// Checkpoint every this many iterations (and always after the last).
    pub snapshot_every: usize,
    /// Gaussian width used to smooth reward curves before looking for extrema.
    pub smoothing_sigma: f64,
    /// Half-width of the neighbourhood an extremum must dominate.
    pub extrema_window: usize,
    pub guards: ControllerKind,
    pub attackers: ControllerKind,
    /// 0 trains both learners every iteration. Otherwise guards train alone for this
    /// many iterations, then attackers alone, and so on.
    pub alternate_period: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            iterations: 100,
            workers: 1,
            snapshot_every: 50,
            smoothing_sigma: 2.0,
            extrema_window: 5,
            guards: ControllerKind::Learned,
            attackers: ControllerKind::Learned,
            alternate_period: 0,
        }
    }
}

/// One point of a team's learning curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub team: TeamId,
    /// Mean over finished episodes of the team's reward per agent.
    pub mean_reward: f64,
    pub win_rate: f64,
    pub episodes: usize,
    /// World steps collected so far, all workers included.
    pub env_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub iteration: usize,
    pub team: TeamId,
    pub stats: TrainStats,
}

#[derive(Clone, Debug)]
pub struct IterationReport {
    pub rows: Vec<CurveRow>,
    pub stats: Vec<StatsRecord>,
    pub rollout: Rollout,
}

struct Side {
    role: Role,
    adam: AdamState,
}

/// Alternates rollout collection and per-team PPO updates.
pub struct Trainer {
    config: RunConfig,
    sides: [Side; 2],
    workers: Vec<RolloutWorker>,
    rng: ChaCha8Rng,
    iteration: usize,
    env_steps: usize,
}

fn slot(team: TeamId) -> usize {
    match team {
        TeamId::Guard => 0,
        TeamId::Attacker => 1,
    }
}

const TEAMS: [TeamId; 2] = [TeamId::Guard, TeamId::Attacker];

impl Trainer {
    /// Builds roles from the `train.guards` / `train.attackers` settings; learners start
    /// from fresh parameters.
    pub fn new(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(config.env.seed);
        init.set_stream(INIT_STREAM);
        let mut role = |kind: ControllerKind| -> Result<Role> {
            Ok(match kind {
                ControllerKind::Learned => Role::Learner(PolicyParams::init(&config.graph, &mut init)?),
                ControllerKind::Scripted => Role::fixed(Controller::Scripted(config.scripted)),
                ControllerKind::Random => Role::fixed(Controller::Random),
            })
        };
        let guard = role(config.train.guards)?;
        let attacker = role(config.train.attackers)?;
        Self::with_roles(config, guard, attacker)
    }

    pub fn with_roles(config: &RunConfig, guard: Role, attacker: Role) -> Result<Self> {
        config.validate()?;
        for role in [&guard, &attacker] {
            if let Role::Learner(p) = role {
                p.check_compatible(&config.graph)?;
            }
        }
        let workers = (0..config.train.workers)
            .map(|i| RolloutWorker::new(config.env.clone(), config.reward.clone(), config.env.seed, i))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.env.seed);
        rng.set_stream(UPDATE_STREAM);
        Ok(Trainer {
            config: config.clone(),
            sides: [Side { role: guard, adam: AdamState::default() }, Side { role: attacker, adam: AdamState::default() }],
            workers,
            rng,
            iteration: 0,
            env_steps: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn role(&self, team: TeamId) -> &Role {
        &self.sides[slot(team)].role
    }

    /// Current parameters of a learning team.
    pub fn params(&self, team: TeamId) -> Option<&PolicyParams> {
        match &self.sides[slot(team)].role {
            Role::Learner(p) => Some(p),
            Role::Pool(_) => None,
        }
    }

    /// Whether `team` is updated on the current iteration.
    pub fn trains(&self, team: TeamId) -> bool {
        if !matches!(self.sides[slot(team)].role, Role::Learner(_)) {
            return false;
        }
        let p = self.config.train.alternate_period;
        p == 0 || (self.iteration / p) % 2 == slot(team)
    }

    pub fn collect(&mut self) -> Result<Rollout> {
        let ppo = &self.config.ppo;
        let rollout = collect_rollouts(
            &mut self.workers,
            &self.sides[0].role,
            &self.sides[1].role,
            ppo.steps_per_iteration,
            ppo.gamma,
            ppo.lambda,
        )?;
        self.env_steps += ppo.steps_per_iteration;
        Ok(rollout)
    }

    /// Updates each training team from its own batch only, then closes the iteration.
    pub fn update(&mut self, rollout: Rollout) -> Result<IterationReport> {
        let mut stats = Vec::new();
        let mut ppo = self.config.ppo.clone();
        ppo.adam.learning_rate = scheduled_learning_rate(&ppo, self.iteration, self.config.train.iterations);
        for team in TEAMS {
            if !self.trains(team) {
                continue;
            }
            let batch = if team == TeamId::Guard { &rollout.guard } else { &rollout.attacker };
            let side = &mut self.sides[slot(team)];
            let Role::Learner(params) = &mut side.role else { unreachable!() };
            let s = ppo_update(params, &mut side.adam, batch, &ppo, &mut self.rng)?;
            log::debug!("iteration {} {team}: {s:?}", self.iteration);
            stats.push(StatsRecord { iteration: self.iteration, team, stats: s });
        }
        let rows = TEAMS.iter().map(|&team| curve_row(self.iteration, team, &rollout, self.env_steps)).collect();
        self.iteration += 1;
        Ok(IterationReport { rows, stats, rollout })
    }

    pub fn iterate(&mut self) -> Result<IterationReport> {
        let rollout = self.collect()?;
        self.update(rollout)
    }
}

fn curve_row(iteration: usize, team: TeamId, rollout: &Rollout, env_steps: usize) -> CurveRow {
    let eps = &rollout.episodes;
    let n = eps.len().max(1) as f64;
    let reward: f64 = eps.iter().map(|e| if team == TeamId::Guard { e.guard_reward } else { e.attacker_reward }).sum();
    let wins = eps.iter().filter(|e| e.winner == team).count();
    CurveRow { iteration, team, mean_reward: reward / n, win_rate: wins as f64 / n, episodes: eps.len(), env_steps }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub curve: Vec<CurveRow>,
    pub stats: Vec<StatsRecord>,
    pub guard: Option<PolicyParams>,
    pub attacker: Option<PolicyParams>,
    /// Checkpoints written to disk, in the order they were taken.
    pub snapshots: Vec<StrategySnapshot>,
}

impl TrainReport {
    pub fn team_curve(&self, team: TeamId) -> Vec<f64> {
        self.curve.iter().filter(|r| r.team == team).map(|r| r.mean_reward).collect()
    }
}

pub const CURVE_HEADER: &str = "iteration\tteam\tmean_reward\twin_rate\tepisodes\tenv_steps";

pub fn format_curve_row(r: &CurveRow) -> String {
    format!("{}\t{}\t{}\t{}\t{}\t{}", r.iteration, r.team, r.mean_reward, r.win_rate, r.episodes, r.env_steps)
}

/// Output files of a run directory.
pub struct RunFiles {
    pub root: PathBuf,
}

impl RunFiles {
    pub fn curve(&self) -> PathBuf {
        self.root.join("curve.tsv")
    }
    pub fn stats(&self) -> PathBuf {
        self.root.join("stats.jsonl")
    }
    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }
    pub fn library(&self) -> PathBuf {
        self.root.join("library.toml")
    }
    pub fn smoothed_curve(&self) -> PathBuf {
        self.root.join("curve_smoothed.tsv")
    }
}

/// Per-team reward curves next to their Gaussian-smoothed versions, one row per
/// iteration and team.
pub fn write_smoothed_curve(path: &Path, curve: &[CurveRow], sigma: f64) -> Result<()> {
    let mut text = String::from("iteration\tteam\tmean_reward\tsmoothed\n");
    for team in TEAMS {
        let rows: Vec<&CurveRow> = curve.iter().filter(|r| r.team == team).collect();
        let raw: Vec<f64> = rows.iter().map(|r| r.mean_reward).collect();
        for (r, s) in rows.iter().zip(smooth_curve(&raw, sigma)) {
            text.push_str(&format!("{}\t{}\t{}\t{}\n", r.iteration, team, r.mean_reward, s));
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

struct Recorder {
    files: Option<RunFiles>,
    curve: Option<fs::File>,
    stats: Option<fs::File>,
}

impl Recorder {
    fn open(out: Option<&Path>) -> Result<Self> {
        let Some(root) = out else { return Ok(Recorder { files: None, curve: None, stats: None }) };
        let files = RunFiles { root: root.to_path_buf() };
        fs::create_dir_all(files.checkpoints()).map_err(|e| Error::io(files.checkpoints(), e))?;
        let mut curve = fs::File::create(files.curve()).map_err(|e| Error::io(files.curve(), e))?;
        writeln!(curve, "{CURVE_HEADER}").map_err(|e| Error::io(files.curve(), e))?;
        let stats = fs::File::create(files.stats()).map_err(|e| Error::io(files.stats(), e))?;
        Ok(Recorder { files: Some(files), curve: Some(curve), stats: Some(stats) })
    }

    fn record(&mut self, report: &IterationReport) -> Result<()> {
        let (Some(files), Some(curve), Some(stats)) = (&self.files, &mut self.curve, &mut self.stats) else {
            return Ok(());
        };
        for row in &report.rows {
            writeln!(curve, "{}", format_curve_row(row)).map_err(|e| Error::io(files.curve(), e))?;
        }
        for s in &report.stats {
            let line = serde_json::to_string(s).expect("stats serialize");
            writeln!(stats, "{line}").map_err(|e| Error::io(files.stats(), e))?;
        }
        Ok(())
    }

    fn snapshot(&self, team: TeamId, iteration: usize, params: &PolicyParams, mean_reward: f64, label: &str) -> Result<Option<StrategySnapshot>> {
        let Some(files) = &self.files else { return Ok(None) };
        let name = format!("{}_{iteration:06}.bin", team.name());
        params.save(&files.checkpoints().join(&name))?;
        Ok(Some(StrategySnapshot {
            team,
            checkpoint: PathBuf::from("checkpoints").join(name),
            iteration,
            mean_reward,
            label: label.to_string(),
            weight: 1.0,
        }))
    }
}

/// Keeps the last few parameter sets of one team so a reward extremum can be
/// checkpointed once enough later iterations confirm it.
struct ExtremaWatch {
    lag: usize,
    recent: VecDeque<(usize, PolicyParams)>,
    taken: Vec<usize>,
}

impl ExtremaWatch {
    fn new(sigma: f64, window: usize) -> Self {
        let lag = window + (3.0 * sigma).ceil() as usize;
        ExtremaWatch { lag, recent: VecDeque::new(), taken: Vec::new() }
    }

    fn push(&mut self, iteration: usize, params: &PolicyParams) {
        self.recent.push_back((iteration, params.clone()));
        while self.recent.len() > self.lag + 1 {
            self.recent.pop_front();
        }
    }

    /// Extrema old enough that later points can no longer move them.
    fn settled(&mut self, curve: &[f64], sigma: f64, window: usize) -> Vec<(usize, PolicyParams)> {
        if curve.len() <= 2 * window + 1 {
            return Vec::new();
        }
        let newest = curve.len() - 1;
        let mut out = Vec::new();
        for e in detect_extrema(curve, sigma, window) {
            if e + self.lag > newest || self.taken.contains(&e) {
                continue;
            }
            if let Some((_, p)) = self.recent.iter().find(|(i, _)| *i == e) {
                self.taken.push(e);
                out.push((e, p.clone()));
            }
        }
        out
    }
}

/// Runs `train.iterations` iterations. With `out`, writes `curve.tsv`, `stats.jsonl`,
/// checkpoints of each learning team every `snapshot_every` iterations, after the last
/// iteration, and at settled reward extrema, plus a `library.toml` listing them.
pub fn train(config: &RunConfig, out: Option<&Path>) -> Result<TrainReport> {
    run(Trainer::new(config)?, config, out)
}

pub(crate) fn run(mut trainer: Trainer, config: &RunConfig, out: Option<&Path>) -> Result<TrainReport> {
    let settings = &config.train;
    let mut recorder = Recorder::open(out)?;
    let mut report = TrainReport { curve: Vec::new(), stats: Vec::new(), guard: None, attacker: None, snapshots: Vec::new() };
    let mut watches = [
        ExtremaWatch::new(settings.smoothing_sigma, settings.extrema_window),
        ExtremaWatch::new(settings.smoothing_sigma, settings.extrema_window),
    ];
    for _ in 0..settings.iterations {
        let it = trainer.iterate()?;
        for row in &it.rows {
            log::info!(
                "iteration {} {}: mean reward {:.3}, win-rate {:.2} over {} episodes",
                row.iteration, row.team, row.mean_reward, row.win_rate, row.episodes
            );
        }
        recorder.record(&it)?;
        report.curve.extend(it.rows.iter().cloned());
        report.stats.extend(it.stats);
        let iteration = trainer.iteration() - 1;
        let last = trainer.iteration() == settings.iterations;
        for team in TEAMS {
            let Some(params) = trainer.params(team) else { continue };
            let curve = report.team_curve(team);
            let reward = *curve.last().expect("row just pushed");
            if out.is_some() {
                let watch = &mut watches[slot(team)];
                watch.push(iteration, params);
                for (e, p) in watch.settled(&curve, settings.smoothing_sigma, settings.extrema_window) {
                    if !report.snapshots.iter().any(|s| s.team == team && s.iteration == e) {
                        report.snapshots.extend(recorder.snapshot(team, e, &p, curve[e], "extremum")?);
                    }
                }
            }
            let taken = report.snapshots.iter().any(|s| s.team == team && s.iteration == iteration);
            if !taken && (last || (settings.snapshot_every > 0 && (iteration + 1) % settings.snapshot_every == 0)) {
                let label = if last { "final" } else { "scheduled" };
                report.snapshots.extend(recorder.snapshot(team, iteration, params, reward, label)?);
            }
        }
    }
    if let Some(files) = &recorder.files {
        OpponentLibrary::write_manifest(&files.library(), &report.snapshots)?;
        write_smoothed_curve(&files.smoothed_curve(), &report.curve, settings.smoothing_sigma)?;
    }
    report.guard = trainer.params(TeamId::Guard).cloned();
    report.attacker = trainer.params(TeamId::Attacker).cloned();
    Ok(report)
}
