//! FortAttack: a two-team laser-tag world with a fort, trained by self-play.
//!
//! Guards defend a fort at the top of the arena, attackers try to reach it, and both
//! sides can fire a short laser. Each team runs one shared graph-attention policy
//! (attention over opponents, then attention-based propagation among teammates) and is
//! trained with its own PPO learner. On top of that sit an opponent-library curriculum,
//! episode recording with attention-ring rendering, and a small CLI.

pub mod cli;
pub mod config;
pub mod curriculum;
pub mod env;
pub mod error;
pub mod nn;
pub mod policy;
pub mod ppo;
pub mod replay;

pub use config::RunConfig;
pub use error::{Error, Result};
