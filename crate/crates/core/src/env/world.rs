use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{EnvConfig, Region, RewardConfig};
use super::observation::{observation_of, ObservationView};
use super::reward::compute_rewards;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamId {
    Guard,
    Attacker,
}

impl TeamId {
    pub fn opponent(self) -> TeamId {
        match self {
            TeamId::Guard => TeamId::Attacker,
            TeamId::Attacker => TeamId::Guard,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TeamId::Guard => "guard",
            TeamId::Attacker => "attacker",
        }
    }
}

impl std::fmt::Display for TeamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TeamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guard" | "guards" => Ok(TeamId::Guard),
            "attacker" | "attackers" => Ok(TeamId::Attacker),
            other => Err(Error::config("team", format!("unknown team `{other}`"))),
        }
    }
}

/// The seven movement choices. Clockwise rotation decreases the heading angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionId {
    AccelPosX,
    AccelNegX,
    AccelPosY,
    AccelNegY,
    RotateCw,
    RotateCcw,
    Stay,
}

impl ActionId {
    pub const COUNT: usize = 7;
    pub const ALL: [ActionId; 7] = [
        ActionId::AccelPosX,
        ActionId::AccelNegX,
        ActionId::AccelPosY,
        ActionId::AccelNegY,
        ActionId::RotateCw,
        ActionId::RotateCcw,
        ActionId::Stay,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ActionId> {
        Self::ALL.get(i).copied()
    }
}

/// One movement choice plus the independent laser trigger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentAction {
    pub action: ActionId,
    pub shoot: bool,
}

impl AgentAction {
    pub const IDLE: AgentAction = AgentAction { action: ActionId::Stay, shoot: false };

    pub fn new(action: ActionId, shoot: bool) -> Self {
        AgentAction { action, shoot }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub team: TeamId,
    pub position: [f64; 2],
    /// Heading in radians, kept in `(-π, π]`.
    pub orientation: f64,
    pub velocity: [f64; 2],
    pub alive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Laser hit; `actor` killed `target`.
    Hit,
    /// Laser fired that hit nobody.
    WastedShot,
    LeftFort,
    ReturnedFort,
    ReachedFort,
    AllAttackersKilled,
    Timeout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t: usize,
    pub kind: EventKind,
    pub actor: Option<usize>,
    pub target: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Steps taken so far.
    pub t: usize,
    pub agents: Vec<AgentState>,
    pub done: bool,
    pub winner: Option<TeamId>,
}

impl WorldState {
    pub fn alive(&self, team: TeamId) -> impl Iterator<Item = &AgentState> {
        self.agents.iter().filter(move |a| a.alive && a.team == team)
    }

    pub fn alive_count(&self, team: TeamId) -> usize {
        self.alive(team).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    /// Indexed by agent id; `None` for agents dead after the step.
    pub observations: Vec<Option<ObservationView>>,
    /// Indexed by agent id.
    pub rewards: Vec<f64>,
    pub events: Vec<Event>,
    pub done: bool,
    pub winner: Option<TeamId>,
}

/// Spawns every agent inside its team's region, at least `2·agent_radius` apart.
pub fn reset(config: &EnvConfig, seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = 2.0 * config.agent_radius;
    let mut agents: Vec<AgentState> = Vec::with_capacity(config.n_agents());
    let teams = std::iter::repeat(TeamId::Guard)
        .take(config.n_guards)
        .chain(std::iter::repeat(TeamId::Attacker).take(config.n_attackers));
    for (id, team) in teams.enumerate() {
        let (region, field) = match team {
            TeamId::Guard => (&config.guard_spawn, "env.guard_spawn"),
            TeamId::Attacker => (&config.attacker_spawn, "env.attacker_spawn"),
        };
        let position = sample_clear_point(region, &agents, min_sep, &mut rng).ok_or_else(|| {
            Error::config(field, "region too small to place every agent without overlap")
        })?;
        let orientation = wrap_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        agents.push(AgentState { id, team, position, orientation, velocity: [0.0, 0.0], alive: true });
    }
    Ok(WorldState { t: 0, agents, done: false, winner: None })
}

fn sample_clear_point(region: &Region, placed: &[AgentState], min_sep: f64, rng: &mut ChaCha8Rng) -> Option<[f64; 2]> {
    const ATTEMPTS: usize = 2000;
    for _ in 0..ATTEMPTS {
        let p = [rng.gen_range(region.x_min..=region.x_max), rng.gen_range(region.y_min..=region.y_max)];
        if placed.iter().all(|a| distance(a.position, p) >= min_sep) {
            return Some(p);
        }
    }
    None
}

/// True iff `target` is alive, on the other team, within laser range, and inside the
/// beam window around the shooter's heading.
pub fn laser_hit_test(shooter: &AgentState, target: &AgentState, config: &EnvConfig) -> bool {
    if !target.alive || target.team == shooter.team {
        return false;
    }
    let dx = target.position[0] - shooter.position[0];
    let dy = target.position[1] - shooter.position[1];
    let dist = dx.hypot(dy);
    if dist > config.laser_range {
        return false;
    }
    if dist == 0.0 {
        return true;
    }
    let off = wrap_angle(dy.atan2(dx) - shooter.orientation).abs();
    off <= config.laser_half_angle
}

/// Advances the world by one step. `actions[id]` must be `Some` exactly for alive agents.
pub fn step(
    config: &EnvConfig,
    rewards: &RewardConfig,
    state: &WorldState,
    actions: &[Option<AgentAction>],
) -> Result<(WorldState, StepOutcome)> {
    if state.done {
        return Err(Error::Contract("step called on a finished episode".into()));
    }
    if actions.len() != state.agents.len() {
        return Err(Error::Contract(format!(
            "{} actions for {} agents",
            actions.len(),
            state.agents.len()
        )));
    }
    for (agent, action) in state.agents.iter().zip(actions) {
        match (agent.alive, action) {
            (false, Some(_)) => {
                return Err(Error::Contract(format!("action supplied for dead agent {}", agent.id)))
            }
            (true, None) => return Err(Error::Contract(format!("no action for alive agent {}", agent.id))),
            _ => {}
        }
    }

    let t = state.t + 1;
    let mut next = state.clone();
    next.t = t;
    for (agent, action) in next.agents.iter_mut().zip(actions) {
        if let Some(action) = action {
            integrate(agent, action.action, config);
        }
    }

    let mut events = Vec::new();
    let mut killed = vec![false; next.agents.len()];
    for (shooter, action) in next.agents.iter().zip(actions) {
        if !matches!(action, Some(AgentAction { shoot: true, .. })) {
            continue;
        }
        let mut hit_any = false;
        for target in &next.agents {
            if laser_hit_test(shooter, target, config) {
                hit_any = true;
                killed[target.id] = true;
                events.push(Event { t, kind: EventKind::Hit, actor: Some(shooter.id), target: Some(target.id) });
            }
        }
        if !hit_any {
            events.push(Event { t, kind: EventKind::WastedShot, actor: Some(shooter.id), target: None });
        }
    }
    for (agent, &dead) in next.agents.iter_mut().zip(&killed) {
        if dead {
            agent.alive = false;
        }
    }

    for (before, after) in state.agents.iter().zip(&next.agents) {
        if before.team != TeamId::Guard || !before.alive {
            continue;
        }
        let was_in = in_guard_zone(before.position, config);
        let is_in = in_guard_zone(after.position, config);
        if was_in && !is_in {
            events.push(Event { t, kind: EventKind::LeftFort, actor: Some(after.id), target: None });
        } else if !was_in && is_in {
            events.push(Event { t, kind: EventKind::ReturnedFort, actor: Some(after.id), target: None });
        }
    }

    if next.alive_count(TeamId::Attacker) == 0 {
        events.push(Event { t, kind: EventKind::AllAttackersKilled, actor: None, target: None });
        next.done = true;
        next.winner = Some(TeamId::Guard);
    } else {
        let reached: Vec<usize> = next
            .alive(TeamId::Attacker)
            .filter(|a| distance(a.position, config.fort_center) <= config.fort_radius)
            .map(|a| a.id)
            .collect();
        for &id in &reached {
            events.push(Event { t, kind: EventKind::ReachedFort, actor: Some(id), target: None });
        }
        if !reached.is_empty() {
            next.done = true;
            next.winner = Some(TeamId::Attacker);
        }
        if !next.done && t >= config.episode_length {
            events.push(Event { t, kind: EventKind::Timeout, actor: None, target: None });
            next.done = true;
            next.winner = Some(TeamId::Guard);
        }
    }

    let reward_vec = compute_rewards(&events, state, &next, config, rewards);
    let observations = next
        .agents
        .iter()
        .map(|a| if a.alive { Some(observation_of(a.id, &next, config)) } else { None })
        .collect();
    let outcome = StepOutcome { observations, rewards: reward_vec, events, done: next.done, winner: next.winner };
    Ok((next, outcome))
}

fn integrate(agent: &mut AgentState, action: ActionId, config: &EnvConfig) {
    let a = config.acceleration;
    let accel = match action {
        ActionId::AccelPosX => [a, 0.0],
        ActionId::AccelNegX => [-a, 0.0],
        ActionId::AccelPosY => [0.0, a],
        ActionId::AccelNegY => [0.0, -a],
        _ => [0.0, 0.0],
    };
    match action {
        ActionId::RotateCw => agent.orientation = wrap_angle(agent.orientation - config.rotation_step),
        ActionId::RotateCcw => agent.orientation = wrap_angle(agent.orientation + config.rotation_step),
        _ => {}
    }
    let keep = 1.0 - config.damping;
    let mut v = [agent.velocity[0] * keep + accel[0], agent.velocity[1] * keep + accel[1]];
    let speed = v[0].hypot(v[1]);
    if speed > config.max_speed {
        let s = config.max_speed / speed;
        v = [v[0] * s, v[1] * s];
    }
    let h = config.arena_half_extent;
    for k in 0..2 {
        let p = agent.position[k] + v[k];
        if p > h || p < -h {
            agent.position[k] = p.clamp(-h, h);
            v[k] = 0.0;
        } else {
            agent.position[k] = p;
        }
    }
    agent.velocity = v;
}

pub(crate) fn in_guard_zone(p: [f64; 2], config: &EnvConfig) -> bool {
    distance(p, config.fort_center) <= config.guard_zone_radius
}

pub(crate) fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut t = theta % TAU;
    if t <= -PI {
        t += TAU;
    } else if t > PI {
        t -= TAU;
    }
    t
}

/// Stateful wrapper around [`reset`]/[`step`] for rollout loops.
#[derive(Clone, Debug)]
pub struct FortAttack {
    pub config: EnvConfig,
    pub rewards: RewardConfig,
    state: WorldState,
}

impl FortAttack {
    pub fn new(config: EnvConfig, rewards: RewardConfig, seed: u64) -> Result<Self> {
        rewards.validate()?;
        let state = reset(&config, seed)?;
        Ok(FortAttack { config, rewards, state })
    }

    pub fn reset(&mut self, seed: u64) -> Result<&WorldState> {
        self.state = reset(&self.config, seed)?;
        Ok(&self.state)
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn observation(&self, agent: usize) -> ObservationView {
        observation_of(agent, &self.state, &self.config)
    }

    pub fn step(&mut self, actions: &[Option<AgentAction>]) -> Result<StepOutcome> {
        let (next, outcome) = step(&self.config, &self.rewards, &self.state, actions)?;
        self.state = next;
        Ok(outcome)
    }
}
