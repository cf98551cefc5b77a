//! Plays one 3v3 episode between rule-based guards and attackers, printing every event
//! as it happens, then tabulates guard win-rates for each pairing of the built-in
//! controllers.
//!
//! ```text
//! cargo run --release --example scripted_match
//! ```

use fortattack::curriculum::evaluate_matchup;
use fortattack::env::{EnvConfig, EventKind, FortAttack, RewardConfig};
use fortattack::ppo::{run_episode, Controller, ScriptedConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fortattack::Result<()> {
    let env = EnvConfig { n_guards: 3, n_attackers: 3, ..EnvConfig::default() };
    let reward = RewardConfig::default();
    let scripted = Controller::Scripted(ScriptedConfig::default());

    let mut world = FortAttack::new(env.clone(), reward.clone(), 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut totals = vec![0.0; env.n_agents()];
    let end = run_episode(&mut world, [&scripted, &scripted], 11, &mut rng, |s| {
        for (t, r) in totals.iter_mut().zip(&s.outcome.rewards) {
            *t += r;
        }
        for e in s.outcome.events.iter().filter(|e| e.kind != EventKind::WastedShot) {
            match (e.actor, e.target) {
                (Some(a), Some(b)) => println!("t={:3} {:?}: agent {a} -> agent {b}", e.t, e.kind),
                (Some(a), None) => println!("t={:3} {:?}: agent {a}", e.t, e.kind),
                _ => println!("t={:3} {:?}", e.t, e.kind),
            }
        }
        Ok(())
    })?;
    println!("winner {:?} after {} steps", end.winner, end.t);
    for a in &end.agents {
        println!("  agent {} ({}): return {:+.2}, alive {}", a.id, a.team, totals[a.id], a.alive);
    }

    println!("\nguard win-rate over 200 episodes (rows: guards, columns: attackers)");
    let kinds = [("scripted", scripted.clone()), ("random", Controller::Random)];
    for (gname, g) in &kinds {
        let row: Vec<String> = kinds
            .iter()
            .map(|(_, a)| evaluate_matchup(&env, &reward, g, a, 200, 5).map(|r| format!("{:.3}", r.win_rate)))
            .collect::<fortattack::Result<_>>()?;
        println!("  {gname:9} {}", row.join("  "));
    }
    Ok(())
}
