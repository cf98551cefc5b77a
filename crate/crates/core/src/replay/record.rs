use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    compute_rewards, step, AgentAction, EnvConfig, Event, FortAttack, RewardConfig, TeamId, WorldState,
};
use crate::error::{Error, Result};
use crate::policy::AttentionReport;
use crate::ppo::{run_episode, Controller};

pub const TRAJECTORY_FORMAT: &str = "fortattack-trajectory";
pub const TRAJECTORY_VERSION: u32 = 1;

/// First line of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub format: String,
    pub version: u32,
    pub env: EnvConfig,
    pub reward: RewardConfig,
    /// Reset seed of the episode.
    pub seed: u64,
    /// Where the guard and attacker behaviour came from (checkpoint path or rule name).
    pub guard: String,
    pub attacker: String,
    pub focus_agent: Option<usize>,
    pub initial: WorldState,
}

/// One line per world step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    /// Step index after the step, starting at 1.
    pub t: usize,
    /// Indexed by agent id; `null` for agents dead before the step.
    pub actions: Vec<Option<AgentAction>>,
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
    /// World state after the step.
    pub state: WorldState,
    /// What the focus agent attended to when choosing this step's action.
    pub attention: Option<AttentionReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub header: TrajectoryHeader,
    pub steps: Vec<StepEntry>,
}

fn describe(c: &Controller) -> String {
    match c {
        Controller::Policy(_) => "policy".into(),
        Controller::Scripted(_) => "scripted".into(),
        Controller::Random => "random".into(),
    }
}

/// Plays and records one episode. Actions are sampled from a generator seeded by
/// `seed`, and the world is reset with `seed` as well. `focus_agent` defaults to the
/// first guard.
pub fn record_episode(
    env: &EnvConfig,
    reward: &RewardConfig,
    guard: &Controller,
    attacker: &Controller,
    seed: u64,
    focus_agent: Option<usize>,
) -> Result<TrajectoryRecord> {
    let focus = focus_agent.or(if env.n_guards > 0 { Some(0) } else { None });
    if let Some(f) = focus {
        if f >= env.n_agents() {
            return Err(Error::config("focus_agent", format!("agent {f} does not exist ({} agents)", env.n_agents())));
        }
    }
    let mut world = FortAttack::new(env.clone(), reward.clone(), seed)?;
    let initial = world.state().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut steps = Vec::new();
    run_episode(&mut world, [guard, attacker], seed, &mut rng, |s| {
        let attention = focus
            .and_then(|f| s.decisions[f].as_ref())
            .and_then(|d| d.policy.as_ref())
            .map(|p| p.attention.clone());
        steps.push(StepEntry {
            t: s.next.t,
            actions: s.actions.to_vec(),
            rewards: s.outcome.rewards.clone(),
            events: s.outcome.events.clone(),
            state: s.next.clone(),
            attention,
        });
        Ok(())
    })?;
    let header = TrajectoryHeader {
        format: TRAJECTORY_FORMAT.into(),
        version: TRAJECTORY_VERSION,
        env: env.clone(),
        reward: reward.clone(),
        seed,
        guard: describe(guard),
        attacker: describe(attacker),
        focus_agent: focus,
        initial,
    };
    Ok(TrajectoryRecord { header, steps })
}

/// Result of re-simulating a record.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub steps: usize,
    /// Steps whose re-simulated state differs from the recorded one.
    pub state_mismatches: Vec<usize>,
    /// Steps whose rewards, recomputed from the recorded events and states, differ.
    pub reward_mismatches: Vec<usize>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.state_mismatches.is_empty() && self.reward_mismatches.is_empty()
    }
}

/// Starts from the recorded initial state, feeds the recorded actions, and compares
/// every state and reward bit for bit.
pub fn replay(record: &TrajectoryRecord) -> Result<ReplayReport> {
    let h = &record.header;
    h.env.validate()?;
    let mut state = h.initial.clone();
    let mut report = ReplayReport { steps: record.steps.len(), ..Default::default() };
    let mut recorded_prev = &h.initial;
    for (i, entry) in record.steps.iter().enumerate() {
        let (next, outcome) = step(&h.env, &h.reward, &state, &entry.actions)?;
        if next != entry.state || outcome.events != entry.events {
            report.state_mismatches.push(i + 1);
        }
        let recomputed = compute_rewards(&entry.events, recorded_prev, &entry.state, &h.env, &h.reward);
        if !bits_equal(&recomputed, &entry.rewards) || !bits_equal(&outcome.rewards, &entry.rewards) {
            report.reward_mismatches.push(i + 1);
        }
        state = next;
        recorded_prev = &entry.state;
    }
    Ok(report)
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// JSON lines: the header, then one [`StepEntry`] per line.
pub fn write_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", serde_json::to_string(&record.header).expect("header serializes")).map_err(io)?;
    for s in &record.steps {
        writeln!(w, "{}", serde_json::to_string(s).expect("step serializes")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a trajectory file. A zero-byte file is an empty trajectory and yields `None`.
pub fn read_trajectory(path: &Path) -> Result<Option<TrajectoryRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |line: usize, reason: String| Error::format("trajectory", format!("line {line}: {reason}"));
    let Some(first) = lines.next() else { return Ok(None) };
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: TrajectoryHeader = serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
    if header.format != TRAJECTORY_FORMAT || header.version != TRAJECTORY_VERSION {
        return Err(bad(1, format!("unsupported format {} v{}", header.format, header.version)));
    }
    let n = header.env.n_agents();
    if header.initial.agents.len() != n {
        return Err(bad(1, "initial state does not match the agent count".into()));
    }
    let mut steps = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: StepEntry = serde_json::from_str(&line).map_err(|e| bad(i + 2, e.to_string()))?;
        if entry.actions.len() != n || entry.rewards.len() != n || entry.state.agents.len() != n {
            return Err(bad(i + 2, "per-agent arrays do not match the agent count".into()));
        }
        steps.push(entry);
    }
    Ok(Some(TrajectoryRecord { header, steps }))
}

impl TrajectoryRecord {
    /// Total reward per team over the whole record.
    pub fn team_reward(&self, team: TeamId) -> f64 {
        let members: Vec<usize> = self.header.initial.agents.iter().filter(|a| a.team == team).map(|a| a.id).collect();
        self.steps.iter().map(|s| members.iter().map(|&i| s.rewards[i]).sum::<f64>()).sum()
    }
}
