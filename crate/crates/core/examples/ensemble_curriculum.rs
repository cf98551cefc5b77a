//! Trains attackers against random guards to build a library of attacker snapshots,
//! then trains a new set of guards against the whole library (one frozen snapshot drawn
//! per episode) and reports the guards' win-rate against every member before and after.
//! Uses `configs/desk.toml` and takes several minutes on one core.
//!
//! ```text
//! cargo run --release --example ensemble_curriculum -- [out_dir]
//! ```

use std::path::PathBuf;

use fortattack::curriculum::{ensemble_train, evaluate_matchup, OpponentLibrary};
use fortattack::env::TeamId;
use fortattack::ppo::{train, Controller, ControllerKind, RunFiles, Trainer};
use fortattack::RunConfig;

fn main() -> fortattack::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("fortattack-ensemble"));
    let desk = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let mut cfg = RunConfig::load(&desk)?;
    cfg.train.guards = ControllerKind::Random;
    cfg.train.attackers = ControllerKind::Learned;
    cfg.train.iterations = 100;
    cfg.train.snapshot_every = 50;

    let attackers = root.join("attackers");
    train(&cfg, Some(&attackers))?;
    let library = OpponentLibrary::load(&RunFiles { root: attackers }.library(), TeamId::Attacker)?;
    for s in library.entries() {
        println!("library: {} iteration {} ({}), reward {:+.2}", s.team, s.iteration, s.label, s.mean_reward);
    }

    cfg.env.seed = 1;
    cfg.train.guards = ControllerKind::Learned;
    cfg.train.iterations = 60;
    let init = Trainer::new(&cfg)?.params(TeamId::Guard).cloned().expect("guards learn");
    let report = ensemble_train(&cfg, TeamId::Guard, &library, Some(init.clone()), Some(&root.join("ensemble")))?;
    let trained = report.guard.expect("guards learned");

    println!("member  before  after");
    for (i, member) in library.params().iter().enumerate() {
        let opp = Controller::policy(member.clone());
        let before = evaluate_matchup(&cfg.env, &cfg.reward, &Controller::policy(init.clone()), &opp, 200, 3)?;
        let after = evaluate_matchup(&cfg.env, &cfg.reward, &Controller::policy(trained.clone()), &opp, 200, 3)?;
        println!("{i:6}  {:.3}   {:.3}", before.win_rate, after.win_rate);
    }
    Ok(())
}
