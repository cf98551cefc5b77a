use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    laser_hit_test, wrap_angle, ActionId, AgentAction, EnvConfig, FortAttack, ObservationView, StepOutcome, TeamId,
    WorldState,
};
use crate::error::Result;
use crate::policy::{forward, sample_action, PolicyOutput, PolicyParams};

/// Rule-based behaviour for either team.
///
/// Attackers head for the fort with probability `aggression` (accelerating along the
/// axis with the larger remaining gap) and otherwise pick a uniformly random movement.
/// Guards turn towards the nearest attacker with probability `aggression`, firing only
/// when one is inside the beam window, and otherwise move at random.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScriptedConfig {
    pub aggression: f64,
    /// Chance of an unaimed shot on any step.
    pub shoot_prob: f64,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        ScriptedConfig { aggression: 0.6, shoot_prob: 0.05 }
    }
}

/// Who picks the actions of one team.
#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    Policy(Box<PolicyParams>),
    Scripted(ScriptedConfig),
    /// Uniform movement, fair-coin trigger.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub action: AgentAction,
    /// Present only for policy-driven agents.
    pub policy: Option<PolicyOutput>,
}

impl Decision {
    pub fn log_prob(&self) -> Option<f64> {
        self.policy.as_ref().map(|p| p.dist.log_prob(self.action))
    }
}

impl Controller {
    pub fn policy(params: PolicyParams) -> Self {
        Controller::Policy(Box::new(params))
    }

    /// Every variant draws exactly two uniforms from `rng`, except scripted agents which
    /// draw three.
    pub fn act<R: Rng + ?Sized>(
        &self,
        agent: usize,
        obs: &ObservationView,
        state: &WorldState,
        config: &EnvConfig,
        rng: &mut R,
    ) -> Result<Decision> {
        match self {
            Controller::Policy(params) => act_policy(params, obs, rng),
            Controller::Scripted(s) => Ok(Decision { action: scripted(s, agent, state, config, rng), policy: None }),
            Controller::Random => {
                let idx = rng.gen_range(0..ActionId::COUNT);
                let shoot = rng.gen_bool(0.5);
                Ok(Decision { action: AgentAction::new(ActionId::ALL[idx], shoot), policy: None })
            }
        }
    }
}

pub(crate) fn act_policy<R: Rng + ?Sized>(params: &PolicyParams, obs: &ObservationView, rng: &mut R) -> Result<Decision> {
    let out = forward(obs, params)?;
    let (action, _) = sample_action(&out.dist, rng);
    Ok(Decision { action, policy: Some(out) })
}

fn scripted<R: Rng + ?Sized>(s: &ScriptedConfig, agent: usize, state: &WorldState, config: &EnvConfig, rng: &mut R) -> AgentAction {
    let u: f64 = rng.gen();
    let idx = rng.gen_range(0..ActionId::COUNT);
    let v: f64 = rng.gen();
    let me = &state.agents[agent];
    let random = AgentAction::new(ActionId::ALL[idx], v < s.shoot_prob);
    if u >= s.aggression {
        return random;
    }
    match me.team {
        TeamId::Attacker => {
            let dx = config.fort_center[0] - me.position[0];
            let dy = config.fort_center[1] - me.position[1];
            let action = if dx.abs() > dy.abs() {
                if dx > 0.0 { ActionId::AccelPosX } else { ActionId::AccelNegX }
            } else if dy > 0.0 {
                ActionId::AccelPosY
            } else {
                ActionId::AccelNegY
            };
            AgentAction::new(action, v < s.shoot_prob)
        }
        TeamId::Guard => {
            let shoot = state.alive(TeamId::Attacker).any(|a| laser_hit_test(me, a, config));
            let nearest = state.alive(TeamId::Attacker).min_by(|a, b| {
                let da = (a.position[0] - me.position[0]).hypot(a.position[1] - me.position[1]);
                let db = (b.position[0] - me.position[0]).hypot(b.position[1] - me.position[1]);
                da.total_cmp(&db)
            });
            let action = match nearest {
                Some(target) => {
                    let bearing = (target.position[1] - me.position[1]).atan2(target.position[0] - me.position[0]);
                    let off = wrap_angle(bearing - me.orientation);
                    if off.abs() <= config.rotation_step / 2.0 {
                        ActionId::Stay
                    } else if off > 0.0 {
                        ActionId::RotateCcw
                    } else {
                        ActionId::RotateCw
                    }
                }
                None => ActionId::Stay,
            };
            AgentAction::new(action, shoot)
        }
    }
}

/// Everything that happened in one world step.
pub struct StepRecord<'a> {
    pub prev: &'a WorldState,
    pub actions: &'a [Option<AgentAction>],
    /// Indexed by agent id; `None` for agents that were already dead.
    pub decisions: &'a [Option<Decision>],
    pub outcome: &'a StepOutcome,
    pub next: &'a WorldState,
}

/// Plays one full episode from `env.reset(seed)`, guards driven by `controllers[0]` and
/// attackers by `controllers[1]`. `on_step` sees every step as it happens.
pub fn run_episode<R: Rng + ?Sized>(
    env: &mut FortAttack,
    controllers: [&Controller; 2],
    seed: u64,
    rng: &mut R,
    mut on_step: impl FnMut(StepRecord<'_>) -> Result<()>,
) -> Result<WorldState> {
    env.reset(seed)?;
    while !env.state().done {
        let prev = env.state().clone();
        let mut actions = vec![None; prev.agents.len()];
        let mut decisions = vec![None; prev.agents.len()];
        for agent in prev.agents.iter().filter(|a| a.alive) {
            let c = match agent.team {
                TeamId::Guard => controllers[0],
                TeamId::Attacker => controllers[1],
            };
            let d = c.act(agent.id, &env.observation(agent.id), &prev, &env.config, rng)?;
            actions[agent.id] = Some(d.action);
            decisions[agent.id] = Some(d);
        }
        let outcome = env.step(&actions)?;
        on_step(StepRecord { prev: &prev, actions: &actions, decisions: &decisions, outcome: &outcome, next: env.state() })?;
    }
    Ok(env.state().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{observation_of, reset, AgentState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lone(team: TeamId, position: [f64; 2], orientation: f64) -> AgentState {
        AgentState { id: 0, team, position, orientation, velocity: [0.0; 2], alive: true }
    }

    #[test]
    fn fully_aggressive_attacker_heads_for_the_fort() {
        let cfg = EnvConfig::default();
        let mut state = reset(&cfg, 0).unwrap();
        state.agents = vec![lone(TeamId::Attacker, [-0.8, 0.7], 0.0)];
        let c = Controller::Scripted(ScriptedConfig { aggression: 1.0, shoot_prob: 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = observation_of(0, &state, &cfg);
        for _ in 0..20 {
            let d = c.act(0, &obs, &state, &cfg, &mut rng).unwrap();
            assert_eq!(d.action, AgentAction::new(ActionId::AccelPosX, false));
            assert!(d.log_prob().is_none());
        }
    }

    #[test]
    fn fully_aggressive_guard_turns_then_fires() {
        let cfg = EnvConfig::default();
        let mut state = reset(&cfg, 0).unwrap();
        let mut attacker = lone(TeamId::Attacker, [0.0, 0.3], 0.0);
        attacker.id = 1;
        state.agents = vec![lone(TeamId::Guard, [0.0, 0.7], 0.0), attacker];
        let c = Controller::Scripted(ScriptedConfig { aggression: 1.0, shoot_prob: 0.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = observation_of(0, &state, &cfg);
        let d = c.act(0, &obs, &state, &cfg, &mut rng).unwrap();
        assert_eq!(d.action, AgentAction::new(ActionId::RotateCw, false));
        state.agents[0].orientation = -std::f64::consts::FRAC_PI_2;
        let d = c.act(0, &obs, &state, &cfg, &mut rng).unwrap();
        assert_eq!(d.action, AgentAction::new(ActionId::Stay, true));
    }

    #[test]
    fn random_controller_covers_every_action() {
        let cfg = EnvConfig::default();
        let state = reset(&cfg, 1).unwrap();
        let obs = observation_of(0, &state, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = [false; 7];
        for _ in 0..500 {
            seen[Controller::Random.act(0, &obs, &state, &cfg, &mut rng).unwrap().action.action.index()] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
