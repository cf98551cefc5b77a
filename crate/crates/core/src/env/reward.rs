use super::config::{EnvConfig, RewardConfig};
use super::world::{distance, in_guard_zone, Event, EventKind, TeamId, WorldState};

/// Per-agent rewards for one transition, indexed by agent id.
///
/// Shots, kills and terminal outcomes are read from `events`. Fort-zone membership
/// changes and attacker approach shaping are recomputed from the two states, so the
/// result only depends on what a trajectory file already stores.
pub fn compute_rewards(
    events: &[Event],
    prev: &WorldState,
    next: &WorldState,
    config: &EnvConfig,
    rewards: &RewardConfig,
) -> Vec<f64> {
    let mut out = vec![0.0; next.agents.len()];
    let team_of = |id: usize| next.agents[id].team;

    for (before, after) in prev.agents.iter().zip(&next.agents) {
        if !before.alive {
            continue;
        }
        match before.team {
            TeamId::Guard => {
                let was_in = in_guard_zone(before.position, config);
                let is_in = in_guard_zone(after.position, config);
                if was_in && !is_in {
                    out[after.id] += rewards.leave_fort;
                } else if !was_in && is_in {
                    out[after.id] += rewards.return_fort;
                }
            }
            TeamId::Attacker => {
                let closer = distance(before.position, config.fort_center) - distance(after.position, config.fort_center);
                out[after.id] += rewards.approach_scale * closer;
            }
        }
    }

    let mut fort_reached = false;
    for e in events {
        match e.kind {
            EventKind::Hit => {
                let (shooter, victim) = (e.actor.expect("hit has actor"), e.target.expect("hit has target"));
                out[shooter] += rewards.hit_bonus;
                out[victim] += rewards.hit_penalty;
            }
            EventKind::WastedShot => {
                let shooter = e.actor.expect("shot has actor");
                out[shooter] += match team_of(shooter) {
                    TeamId::Guard => rewards.wasted_shot_guard,
                    TeamId::Attacker => rewards.wasted_shot_attacker,
                };
            }
            EventKind::AllAttackersKilled => {
                for (before, after) in prev.agents.iter().zip(&next.agents) {
                    match after.team {
                        TeamId::Guard if after.alive => out[after.id] += rewards.all_killed_guard,
                        TeamId::Attacker if before.alive && !after.alive => {
                            out[after.id] += rewards.all_killed_attacker
                        }
                        _ => {}
                    }
                }
            }
            EventKind::ReachedFort => {
                out[e.actor.expect("fort event has actor")] += rewards.fort_reached_attacker;
                fort_reached = true;
            }
            EventKind::LeftFort | EventKind::ReturnedFort | EventKind::Timeout => {}
        }
    }
    if fort_reached {
        for g in next.alive(TeamId::Guard) {
            out[g.id] += rewards.fort_reached_guard;
        }
    }
    out
}
