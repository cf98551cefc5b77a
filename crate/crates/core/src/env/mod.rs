//! The FortAttack world: two teams, a fort, lasers and the reward table.

mod config;
mod observation;
mod reward;
mod world;

pub use config::{EnvConfig, ObservationFrame, Region, RewardConfig};
pub use observation::{agent_features, observation_of, relative_features, ObservationView, FEATURE_DIM};
pub use reward::compute_rewards;
pub use world::{
    laser_hit_test, reset, step, wrap_angle, ActionId, AgentAction, AgentState, Event, EventKind, FortAttack,
    StepOutcome, TeamId, WorldState,
};
