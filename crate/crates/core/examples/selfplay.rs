//! Short self-play run: both teams learn at once with their own PPO learners. Writes
//! a full run directory (curve, smoothed curve, stats log, checkpoints, library
//! manifest) and prints the per-iteration curve.
//!
//! ```text
//! cargo run --release --example selfplay -- [out_dir]
//! FORTATTACK_LOG=info cargo run --release --example selfplay
//! ```

use std::path::PathBuf;

use fortattack::policy::GraphConfig;
use fortattack::ppo::{train, RunFiles};
use fortattack::RunConfig;

fn main() -> fortattack::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FORTATTACK_LOG", "warn")).init();
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("fortattack-selfplay"));

    let mut cfg = RunConfig::default();
    cfg.env.n_guards = 3;
    cfg.env.n_attackers = 3;
    cfg.graph = GraphConfig {
        d1: 8,
        d2: 8,
        hidden_self: vec![16],
        hidden_opponent: vec![16],
        hidden_update: vec![16],
        hidden_policy: vec![16],
        hidden_value: vec![16],
        ..GraphConfig::default()
    };
    cfg.ppo.steps_per_iteration = 1024;
    cfg.train.iterations = 12;
    cfg.train.snapshot_every = 4;
    cfg.train.workers = 2;
    cfg.validate()?;

    let report = train(&cfg, Some(&out))?;
    println!("iteration  team      reward   win-rate  episodes");
    for row in &report.curve {
        println!("{:9}  {:8}  {:+7.2}  {:8.2}  {:8}", row.iteration, row.team.to_string(), row.mean_reward, row.win_rate, row.episodes);
    }
    let files = RunFiles { root: out };
    println!("{} checkpoints listed in {}", report.snapshots.len(), files.library().display());
    println!("curves: {} and {}", files.curve().display(), files.smoothed_curve().display());
    Ok(())
}
