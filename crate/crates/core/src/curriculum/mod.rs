//! Strategy snapshots, opponent libraries, ensemble training and matchup evaluation.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::env::{EnvConfig, FortAttack, RewardConfig, TeamId};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::ppo::{run_episode, Controller, EpisodeStats, OpponentPool, Role, TrainReport, Trainer};
use crate::replay::smooth_curve;

/// A frozen checkpoint plus the bookkeeping needed to use it as an opponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySnapshot {
    pub team: TeamId,
    /// Relative paths are resolved against the manifest's directory.
    pub checkpoint: PathBuf,
    #[serde(default)]
    pub iteration: usize,
    #[serde(default)]
    pub mean_reward: f64,
    /// Free text, e.g. "sneak" or "deceive".
    #[serde(default)]
    pub label: String,
    #[serde(default = "unit")]
    pub weight: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    snapshot: Vec<StrategySnapshot>,
}

/// Loaded snapshots of one team with normalised sampling weights.
#[derive(Clone, Debug, PartialEq)]
pub struct OpponentLibrary {
    team: TeamId,
    entries: Vec<StrategySnapshot>,
    params: Vec<PolicyParams>,
    weights: Vec<f64>,
}

impl OpponentLibrary {
    pub fn new(entries: Vec<(StrategySnapshot, PolicyParams)>) -> Result<Self> {
        let Some(team) = entries.first().map(|(s, _)| s.team) else {
            return Err(Error::config("library", "no snapshots"));
        };
        if let Some((s, _)) = entries.iter().find(|(s, _)| s.team != team) {
            return Err(Error::config(
                "library.team",
                format!("mixes {team} and {} snapshots", s.team),
            ));
        }
        let raw: Vec<f64> = entries.iter().map(|(s, _)| s.weight).collect();
        if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || raw.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("library.weight", "weights must be non-negative with a positive sum"));
        }
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let (entries, params) = entries.into_iter().unzip();
        Ok(OpponentLibrary { team, entries, params, weights })
    }

    /// Reads a manifest and loads every checkpoint of `team`. Relative checkpoint paths
    /// resolve against the manifest's directory.
    pub fn load(manifest: &Path, team: TeamId) -> Result<Self> {
        let snapshots = read_manifest(manifest)?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut entries = Vec::new();
        for mut s in snapshots.into_iter().filter(|s| s.team == team) {
            if s.checkpoint.is_relative() {
                s.checkpoint = base.join(&s.checkpoint);
            }
            let p = PolicyParams::load(&s.checkpoint)?;
            entries.push((s, p));
        }
        if entries.is_empty() {
            return Err(Error::config("library", format!("{} lists no {team} snapshots", manifest.display())));
        }
        Self::new(entries)
    }

    pub fn write_manifest(path: &Path, snapshots: &[StrategySnapshot]) -> Result<()> {
        let text = toml::to_string(&Manifest { snapshot: snapshots.to_vec() }).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn team(&self) -> TeamId {
        self.team
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StrategySnapshot] {
        &self.entries
    }

    pub fn params(&self) -> &[PolicyParams] {
        &self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pool(&self) -> Result<OpponentPool> {
        OpponentPool::new(self.params.iter().cloned().map(Controller::policy).collect(), self.weights.clone())
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<StrategySnapshot>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| Error::format("library manifest", e.message().to_string()))?;
    Ok(m.snapshot)
}

/// Ensemble-training options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSettings {
    /// The team being trained; the library holds the other team.
    pub team: TeamId,
    /// Start from this checkpoint instead of fresh parameters.
    pub init_checkpoint: Option<PathBuf>,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings { team: TeamId::Guard, init_checkpoint: None }
    }
}

/// Trains `team` against opponents drawn from `library` once per episode; the library
/// itself is never modified. `init` overrides fresh initialisation.
pub fn ensemble_train(
    config: &RunConfig,
    team: TeamId,
    library: &OpponentLibrary,
    init: Option<PolicyParams>,
    out: Option<&Path>,
) -> Result<TrainReport> {
    if library.team() != team.opponent() {
        return Err(Error::config(
            "library.team",
            format!("training {team} needs {} snapshots, library holds {}", team.opponent(), library.team()),
        ));
    }
    let learner = match init {
        Some(p) => p,
        None => {
            let mut cfg = config.clone();
            cfg.train.guards = crate::ppo::ControllerKind::Learned;
            cfg.train.attackers = crate::ppo::ControllerKind::Learned;
            let fresh = Trainer::new(&cfg)?;
            fresh.params(team).cloned().expect("learned team has parameters")
        }
    };
    let learner = Role::Learner(learner);
    let pool = Role::Pool(library.pool()?);
    let (guard, attacker) = match team {
        TeamId::Guard => (learner, pool),
        TeamId::Attacker => (pool, learner),
    };
    crate::ppo::run(Trainer::with_roles(config, guard, attacker)?, config, out)
}

/// Outcome of a batch of evaluation episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchupReport {
    pub episodes: usize,
    pub guard_wins: usize,
    /// `guard_wins / episodes`.
    pub win_rate: f64,
    pub mean_guard_reward: f64,
    pub mean_attacker_reward: f64,
    pub results: Vec<EpisodeStats>,
}

/// Plays `episodes` episodes with stochastic controllers. Deterministic in `seed`; the
/// i-th episode's reset seed and action draws do not depend on the controllers.
pub fn evaluate_matchup(
    env: &EnvConfig,
    reward: &RewardConfig,
    guard: &Controller,
    attacker: &Controller,
    episodes: usize,
    seed: u64,
) -> Result<MatchupReport> {
    if episodes == 0 {
        return Err(Error::config("episodes", "must be at least 1"));
    }
    for (c, team) in [(guard, TeamId::Guard), (attacker, TeamId::Attacker)] {
        if let Controller::Policy(p) = c {
            p.config.validate().map_err(|_| Error::config(format!("{team} checkpoint"), "invalid graph config"))?;
        }
    }
    let mut world = FortAttack::new(env.clone(), reward.clone(), seed)?;
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let episode_seed: u64 = seeds.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let mut totals = vec![0.0; env.n_agents()];
        let end = run_episode(&mut world, [guard, attacker], episode_seed, &mut rng, |s| {
            for (t, r) in totals.iter_mut().zip(&s.outcome.rewards) {
                *t += r;
            }
            Ok(())
        })?;
        let team_mean = |team: TeamId, n: usize| -> f64 {
            end.agents.iter().filter(|a| a.team == team).map(|a| totals[a.id]).sum::<f64>() / n.max(1) as f64
        };
        results.push(EpisodeStats {
            seed: episode_seed,
            winner: end.winner.expect("finished episode"),
            length: end.t,
            guard_reward: team_mean(TeamId::Guard, env.n_guards),
            attacker_reward: team_mean(TeamId::Attacker, env.n_attackers),
            picks: [None, None],
        });
    }
    let n = episodes as f64;
    let guard_wins = results.iter().filter(|r| r.winner == TeamId::Guard).count();
    Ok(MatchupReport {
        episodes,
        guard_wins,
        win_rate: guard_wins as f64 / n,
        mean_guard_reward: results.iter().map(|r| r.guard_reward).sum::<f64>() / n,
        mean_attacker_reward: results.iter().map(|r| r.attacker_reward).sum::<f64>() / n,
        results,
    })
}

/// Interior local maxima and minima of the Gaussian-smoothed curve. An index counts
/// when its smoothed value is strictly above (or below) every other value within
/// `window` places on either side. The first and last index never count.
pub fn detect_extrema(curve: &[f64], sigma: f64, window: usize) -> Vec<usize> {
    let n = curve.len();
    if n < 3 {
        return Vec::new();
    }
    let s = smooth_curve(curve, sigma);
    (1..n - 1)
        .filter(|&i| {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(n - 1);
            let others = (lo..=hi).filter(|&j| j != i);
            others.clone().all(|j| s[i] > s[j]) || others.clone().all(|j| s[i] < s[j])
        })
        .collect()
}

#[cfg(test)]
mod tests;
