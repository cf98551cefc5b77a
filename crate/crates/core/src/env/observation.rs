use serde::{Deserialize, Serialize};

use super::config::{EnvConfig, ObservationFrame};
use super::world::{AgentState, WorldState};

/// Width of one agent's feature vector: `x, y, cos θ, sin θ, vx, vy`.
pub const FEATURE_DIM: usize = 6;

/// What one living agent sees: itself, its living teammates and its living opponents.
/// The id lists run parallel to the feature lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationView {
    pub self_id: usize,
    pub self_features: Vec<f64>,
    pub teammate_ids: Vec<usize>,
    pub teammates: Vec<Vec<f64>>,
    pub opponent_ids: Vec<usize>,
    pub opponents: Vec<Vec<f64>>,
}

/// Positions are scaled by the arena half-extent and velocities by the speed cap so every
/// feature lies in `[-1, 1]`.
pub fn agent_features(agent: &AgentState, config: &EnvConfig) -> Vec<f64> {
    let h = config.arena_half_extent;
    let v = config.max_speed;
    vec![
        agent.position[0] / h,
        agent.position[1] / h,
        agent.orientation.cos(),
        agent.orientation.sin(),
        agent.velocity[0] / v,
        agent.velocity[1] / v,
    ]
}

/// `other` as seen from `me`: offset and velocity rotated into `me`'s heading frame,
/// heading relative to `me`'s. Same scaling as [`agent_features`].
pub fn relative_features(me: &AgentState, other: &AgentState, config: &EnvConfig) -> Vec<f64> {
    let h = config.arena_half_extent;
    let v = config.max_speed;
    let (s, c) = me.orientation.sin_cos();
    let rot = |x: f64, y: f64| [c * x + s * y, -s * x + c * y];
    let d = rot(other.position[0] - me.position[0], other.position[1] - me.position[1]);
    let w = rot(other.velocity[0], other.velocity[1]);
    let dtheta = other.orientation - me.orientation;
    vec![d[0] / h, d[1] / h, dtheta.cos(), dtheta.sin(), w[0] / v, w[1] / v]
}

pub fn observation_of(agent: usize, state: &WorldState, config: &EnvConfig) -> ObservationView {
    let me = &state.agents[agent];
    debug_assert!(me.alive, "observation requested for dead agent {agent}");
    let mut view = ObservationView {
        self_id: agent,
        self_features: agent_features(me, config),
        teammate_ids: Vec::new(),
        teammates: Vec::new(),
        opponent_ids: Vec::new(),
        opponents: Vec::new(),
    };
    for other in state.agents.iter().filter(|a| a.alive && a.id != agent) {
        let f = match config.observation_frame {
            ObservationFrame::Absolute => agent_features(other, config),
            ObservationFrame::Egocentric => relative_features(me, other, config),
        };
        if other.team == me.team {
            view.teammate_ids.push(other.id);
            view.teammates.push(f);
        } else {
            view.opponent_ids.push(other.id);
            view.opponents.push(f);
        }
    }
    view
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::world::{reset, TeamId};

    #[test]
    fn full_five_vs_five_view() {
        let cfg = EnvConfig::default();
        let s = reset(&cfg, 0).unwrap();
        let obs = observation_of(0, &s, &cfg);
        assert_eq!(obs.teammates.len(), 4);
        assert_eq!(obs.opponents.len(), 5);
        assert!(obs.teammate_ids.iter().all(|&i| s.agents[i].team == TeamId::Guard && i != 0));
        assert_eq!(obs.self_features.len(), FEATURE_DIM);
    }

    #[test]
    fn dead_agents_are_invisible() {
        let cfg = EnvConfig { n_guards: 2, n_attackers: 3, ..EnvConfig::default() };
        let mut s = reset(&cfg, 1).unwrap();
        s.agents[1].alive = false;
        s.agents[3].alive = false;
        let obs = observation_of(0, &s, &cfg);
        assert!(obs.teammates.is_empty());
        assert_eq!(obs.opponent_ids, vec![2, 4]);
    }

    #[test]
    fn egocentric_view_puts_a_target_dead_ahead_on_the_x_axis() {
        use crate::env::world::AgentState;
        let cfg = EnvConfig::default();
        let agent = |id, team, position: [f64; 2], orientation: f64, velocity| AgentState {
            id,
            team,
            position,
            orientation,
            velocity,
            alive: true,
        };
        let me = agent(0, TeamId::Guard, [0.1, 0.6], std::f64::consts::FRAC_PI_2, [0.0; 2]);
        let other = agent(1, TeamId::Attacker, [0.1, 0.9], std::f64::consts::PI, [0.05, 0.0]);
        let f = relative_features(&me, &other, &cfg);
        let expected = [0.3, 0.0, 0.0, 1.0, 0.0, -1.0];
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{f:?}");
        }
        let s = WorldState { t: 0, agents: vec![me.clone(), other.clone()], done: false, winner: None };
        let ego = observation_of(0, &s, &cfg);
        assert_eq!(ego.opponents[0], f);
        assert_eq!(ego.self_features, agent_features(&me, &cfg));
        let abs = observation_of(0, &s, &EnvConfig { observation_frame: ObservationFrame::Absolute, ..cfg.clone() });
        assert_eq!(abs.opponents[0], agent_features(&other, &cfg));
    }

    #[test]
    fn features_are_bounded() {
        let cfg = EnvConfig::default();
        let s = reset(&cfg, 9).unwrap();
        for a in &s.agents {
            assert!(agent_features(a, &cfg).iter().all(|v| v.abs() <= 1.0));
        }
    }
}
