//! Records one episode between a random-initialised guard policy and scripted
//! attackers, checks that it replays bit for bit, and renders every step to PNG with
//! the focus guard's attention rings.
//!
//! ```text
//! cargo run --release --example record_render -- [out_dir]
//! ```

use std::path::PathBuf;

use fortattack::env::{EnvConfig, RewardConfig, TeamId};
use fortattack::policy::{GraphConfig, PolicyParams};
use fortattack::ppo::{Controller, ScriptedConfig};
use fortattack::replay::{read_trajectory, record_episode, render_frames, replay, write_trajectory, RenderStyle};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fortattack::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("fortattack-replay"));
    std::fs::create_dir_all(&out).map_err(|e| fortattack::Error::io(&out, e))?;

    let env = EnvConfig { n_guards: 3, n_attackers: 3, ..EnvConfig::default() };
    let guard = PolicyParams::init(&GraphConfig::default(), &mut ChaCha8Rng::seed_from_u64(4))?;
    let record = record_episode(
        &env,
        &RewardConfig::default(),
        &Controller::policy(guard),
        &Controller::Scripted(ScriptedConfig::default()),
        21,
        Some(1),
    )?;
    let path = out.join("episode.jsonl");
    write_trajectory(&path, &record)?;
    let back = read_trajectory(&path)?.expect("just written");
    let check = replay(&back)?;
    println!(
        "{} steps, winner {:?}, guard return {:+.2}, replay exact: {}",
        back.steps.len(),
        back.steps.last().and_then(|s| s.state.winner),
        back.team_reward(TeamId::Guard),
        check.is_exact()
    );

    let frames = render_frames(&back, &RenderStyle::default(), &out.join("frames"))?;
    println!("wrote {} frames under {}", frames.len(), out.join("frames").display());
    Ok(())
}
