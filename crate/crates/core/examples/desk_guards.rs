//! Trains two guards against two scripted attackers with `configs/desk.toml`, then
//! compares the trained guards with an untrained policy on 200 evaluation episodes.
//! Takes several minutes on one core.
//!
//! ```text
//! cargo run --release --example desk_guards
//! ```

use std::path::Path;

use fortattack::curriculum::evaluate_matchup;
use fortattack::env::TeamId;
use fortattack::ppo::{Controller, Trainer};
use fortattack::replay::smooth_curve;
use fortattack::RunConfig;

fn main() -> fortattack::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = RunConfig::load(&path)?;
    let mut trainer = Trainer::new(&cfg)?;
    let untrained = trainer.params(TeamId::Guard).cloned().expect("guards learn");

    let mut curve = Vec::new();
    for _ in 0..cfg.train.iterations {
        let it = trainer.iterate()?;
        let row = &it.rows[0];
        curve.push(row.mean_reward);
        if row.iteration % 10 == 9 {
            println!("iteration {:3}: guard reward {:+6.2}, win-rate {:.2}", row.iteration, row.mean_reward, row.win_rate);
        }
    }
    let smooth = smooth_curve(&curve, cfg.train.smoothing_sigma);
    println!("smoothed guard reward: first {:+.2}, last {:+.2}", smooth[0], smooth[smooth.len() - 1]);

    let attackers = Controller::Scripted(cfg.scripted);
    let trained = trainer.params(TeamId::Guard).cloned().expect("guards learn");
    for (name, p) in [("untrained", untrained), ("trained", trained)] {
        let r = evaluate_matchup(&cfg.env, &cfg.reward, &Controller::policy(p), &attackers, 200, 1)?;
        println!("{name:9} guards: win-rate {:.3}, mean reward {:+.2}", r.win_rate, r.mean_guard_reward);
    }
    Ok(())
}
