//! Per-team PPO: controllers, rollout collection, advantage estimation, clipped
//! surrogate updates and the training loop.

mod config;
mod controller;
mod gae;
mod rollout;
mod train;
mod update;

pub use config::{scheduled_learning_rate, PpoConfig};
pub use controller::{run_episode, Controller, Decision, ScriptedConfig, StepRecord};
pub use gae::compute_gae;
pub use rollout::{collect_rollouts, EpisodeStats, OpponentPool, Role, Rollout, RolloutBatch, RolloutWorker, Transition};
pub use train::{
    format_curve_row, train, write_smoothed_curve, ControllerKind, CurveRow, IterationReport, RunFiles, StatsRecord, TrainReport,
    TrainSettings, Trainer, CURVE_HEADER,
};
pub(crate) use train::run;
pub use update::{clipped_objective, normalize_advantages, ppo_loss_gradient, ppo_update, TrainStats};
