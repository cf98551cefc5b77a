use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::controller::{act_policy, Controller, Decision};
use super::gae::compute_gae;
use crate::env::{AgentAction, EnvConfig, FortAttack, ObservationView, RewardConfig, TeamId};
use crate::error::{Error, Result};
use crate::policy::{forward, PolicyParams};

/// One agent's decision and its consequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub agent: usize,
    pub team: TeamId,
    pub obs: ObservationView,
    pub action: AgentAction,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    /// The agent's last step in this episode (killed, or the episode ended).
    pub done: bool,
    pub t: usize,
}

/// All transitions of one team, ordered agent segment by agent segment, with GAE
/// targets aligned to `transitions`.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch {
    pub team: TeamId,
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn empty(team: TeamId) -> Self {
        RolloutBatch { team, transitions: Vec::new(), advantages: Vec::new(), returns: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn extend(&mut self, other: RolloutBatch) {
        self.transitions.extend(other.transitions);
        self.advantages.extend(other.advantages);
        self.returns.extend(other.returns);
    }

    fn push_segment(&mut self, segment: Vec<Transition>, last_value: f64, gamma: f64, lambda: f64) {
        let rewards: Vec<f64> = segment.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = segment.iter().map(|t| t.value).collect();
        let dones: Vec<bool> = segment.iter().map(|t| t.done).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, last_value, gamma, lambda);
        self.transitions.extend(segment);
        self.advantages.extend(adv);
        self.returns.extend(ret);
    }
}

/// A fixed set of frozen controllers; one member is drawn per episode.
#[derive(Clone, Debug, PartialEq)]
pub struct OpponentPool {
    members: Vec<Controller>,
    weights: Vec<f64>,
}

impl OpponentPool {
    /// Weights are normalised to sum to one.
    pub fn new(members: Vec<Controller>, weights: Vec<f64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("library", "opponent pool is empty"));
        }
        if weights.len() != members.len() {
            return Err(Error::config("library.weight", "one weight per member is required"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("library.weight", "weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("library.weight", "weights sum to zero"));
        }
        Ok(OpponentPool { members, weights: weights.iter().map(|w| w / total).collect() })
    }

    pub fn uniform(members: Vec<Controller>) -> Result<Self> {
        let n = members.len();
        Self::new(members, vec![1.0; n])
    }

    pub fn single(member: Controller) -> Self {
        OpponentPool { members: vec![member], weights: vec![1.0] }
    }

    pub fn members(&self) -> &[Controller] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Always consumes one uniform.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).expect("positive total weight")
    }
}

/// How one team is driven during collection.
#[derive(Clone, Debug, PartialEq)]
pub enum Role {
    /// Acts with these parameters and has its transitions recorded.
    Learner(PolicyParams),
    /// Frozen; not recorded.
    Pool(OpponentPool),
}

impl Role {
    pub fn fixed(controller: Controller) -> Self {
        Role::Pool(OpponentPool::single(controller))
    }

    fn decide<R: Rng + ?Sized>(
        &self,
        pick: Option<usize>,
        agent: usize,
        env: &FortAttack,
        obs: &ObservationView,
        rng: &mut R,
    ) -> Result<Decision> {
        match self {
            Role::Learner(params) => act_policy(params, obs, rng),
            Role::Pool(pool) => {
                pool.members[pick.expect("pool member drawn at reset")].act(agent, obs, env.state(), &env.config, rng)
            }
        }
    }
}

/// Summary of one finished episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub seed: u64,
    pub winner: TeamId,
    pub length: usize,
    /// Total team reward divided by team size.
    pub guard_reward: f64,
    pub attacker_reward: f64,
    /// Pool members drawn for this episode, `[guard, attacker]`.
    pub picks: [Option<usize>; 2],
}

/// One environment instance with its own random stream. Episodes carry over between
/// collection calls.
#[derive(Clone, Debug)]
pub struct RolloutWorker {
    env: FortAttack,
    rng: ChaCha8Rng,
    live: bool,
    episode_seed: u64,
    picks: [Option<usize>; 2],
    totals: Vec<f64>,
    pending: Vec<Vec<Transition>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub guard: RolloutBatch,
    pub attacker: RolloutBatch,
    pub episodes: Vec<EpisodeStats>,
}

fn team_slot(team: TeamId) -> usize {
    match team {
        TeamId::Guard => 0,
        TeamId::Attacker => 1,
    }
}

impl RolloutWorker {
    /// Worker `index` draws from stream `index` of the generator seeded by `seed`.
    pub fn new(config: EnvConfig, rewards: RewardConfig, seed: u64, index: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let n = config.n_agents();
        let env = FortAttack::new(config, rewards, seed)?;
        Ok(RolloutWorker { env, rng, live: false, episode_seed: 0, picks: [None; 2], totals: vec![0.0; n], pending: vec![Vec::new(); n] })
    }

    pub fn env(&self) -> &FortAttack {
        &self.env
    }

    fn begin_episode(&mut self, roles: [&Role; 2]) -> Result<()> {
        self.episode_seed = self.rng.gen();
        self.env.reset(self.episode_seed)?;
        for (slot, role) in roles.iter().enumerate() {
            self.picks[slot] = match role {
                Role::Learner(_) => None,
                Role::Pool(pool) => Some(pool.draw(&mut self.rng)),
            };
        }
        self.totals.iter_mut().for_each(|t| *t = 0.0);
        self.live = true;
        Ok(())
    }

    /// Advances `steps` world steps, resetting finished episodes, and returns each
    /// learner team's transitions with advantages. Unfinished agent segments are
    /// bootstrapped with the current value estimate and continue in the next call.
    pub fn collect(&mut self, guard: &Role, attacker: &Role, steps: usize, gamma: f64, lambda: f64) -> Result<Rollout> {
        let roles = [guard, attacker];
        let mut out = Rollout {
            guard: RolloutBatch::empty(TeamId::Guard),
            attacker: RolloutBatch::empty(TeamId::Attacker),
            episodes: Vec::new(),
        };
        for _ in 0..steps {
            if !self.live {
                self.begin_episode(roles)?;
            }
            let state = self.env.state().clone();
            let mut actions: Vec<Option<AgentAction>> = vec![None; state.agents.len()];
            let mut decisions: Vec<Option<(ObservationView, Decision)>> = vec![None; state.agents.len()];
            for agent in state.agents.iter().filter(|a| a.alive) {
                let slot = team_slot(agent.team);
                let obs = self.env.observation(agent.id);
                let d = roles[slot].decide(self.picks[slot], agent.id, &self.env, &obs, &mut self.rng)?;
                actions[agent.id] = Some(d.action);
                if matches!(roles[slot], Role::Learner(_)) {
                    decisions[agent.id] = Some((obs, d));
                }
            }
            let outcome = self.env.step(&actions)?;
            for (total, r) in self.totals.iter_mut().zip(&outcome.rewards) {
                *total += r;
            }
            for (id, entry) in decisions.into_iter().enumerate() {
                let Some((obs, d)) = entry else { continue };
                let policy = d.policy.as_ref().expect("learner decisions carry policy output");
                let done = outcome.done || outcome.observations[id].is_none();
                self.pending[id].push(Transition {
                    agent: id,
                    team: state.agents[id].team,
                    obs,
                    action: d.action,
                    log_prob: policy.dist.log_prob(d.action),
                    reward: outcome.rewards[id],
                    value: policy.value,
                    done,
                    t: state.t,
                });
                if done {
                    let segment = std::mem::take(&mut self.pending[id]);
                    let batch = if state.agents[id].team == TeamId::Guard { &mut out.guard } else { &mut out.attacker };
                    batch.push_segment(segment, 0.0, gamma, lambda);
                }
            }
            if outcome.done {
                let cfg = &self.env.config;
                let team_total = |team: TeamId| -> f64 {
                    state.agents.iter().filter(|a| a.team == team).map(|a| self.totals[a.id]).sum()
                };
                out.episodes.push(EpisodeStats {
                    seed: self.episode_seed,
                    winner: outcome.winner.expect("finished episodes have a winner"),
                    length: self.env.state().t,
                    guard_reward: team_total(TeamId::Guard) / cfg.n_guards.max(1) as f64,
                    attacker_reward: team_total(TeamId::Attacker) / cfg.n_attackers.max(1) as f64,
                    picks: self.picks,
                });
                self.live = false;
            }
        }
        for id in 0..self.pending.len() {
            if self.pending[id].is_empty() {
                continue;
            }
            let segment = std::mem::take(&mut self.pending[id]);
            let team = segment[0].team;
            let Role::Learner(params) = roles[team_slot(team)] else { unreachable!("only learners record") };
            let last_value = forward(&self.env.observation(id), params)?.value;
            let batch = if team == TeamId::Guard { &mut out.guard } else { &mut out.attacker };
            batch.push_segment(segment, last_value, gamma, lambda);
        }
        Ok(out)
    }
}

/// Runs every worker on its share of `steps` (the first `steps % n` workers take one
/// extra) on scoped threads and concatenates the results in worker order, so the
/// output does not depend on thread scheduling.
pub fn collect_rollouts(
    workers: &mut [RolloutWorker],
    guard: &Role,
    attacker: &Role,
    steps: usize,
    gamma: f64,
    lambda: f64,
) -> Result<Rollout> {
    let n = workers.len().max(1);
    let results: Vec<Result<Rollout>> = if workers.len() <= 1 {
        workers.iter_mut().map(|w| w.collect(guard, attacker, steps, gamma, lambda)).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = workers
                .iter_mut()
                .enumerate()
                .map(|(i, w)| {
                    let share = steps / n + usize::from(i < steps % n);
                    scope.spawn(move || w.collect(guard, attacker, share, gamma, lambda))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("rollout worker panicked")).collect()
        })
    };
    let mut merged = Rollout {
        guard: RolloutBatch::empty(TeamId::Guard),
        attacker: RolloutBatch::empty(TeamId::Attacker),
        episodes: Vec::new(),
    };
    for r in results {
        let r = r?;
        merged.guard.extend(r.guard);
        merged.attacker.extend(r.attacker);
        merged.episodes.extend(r.episodes);
    }
    Ok(merged)
}
