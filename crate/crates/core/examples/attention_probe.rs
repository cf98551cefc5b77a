//! Runs a freshly initialised graph-attention policy on one observation and prints
//! what it attends to, then shows that reordering teammates and opponents leaves the
//! action distribution unchanged.
//!
//! ```text
//! cargo run --release --example attention_probe
//! ```

use fortattack::env::{reset, EnvConfig, ObservationView};
use fortattack::nn::ParamSet;
use fortattack::policy::{forward, GraphConfig, PolicyParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fortattack::Result<()> {
    let env = EnvConfig { n_guards: 4, n_attackers: 5, ..EnvConfig::default() };
    let world = reset(&env, 2)?;
    let params = PolicyParams::init(&GraphConfig { k: 2, ..GraphConfig::default() }, &mut ChaCha8Rng::seed_from_u64(9))?;
    println!("policy parameters: {}", params.param_count());

    let obs = fortattack::env::observation_of(0, &world, &env);
    let out = forward(&obs, &params)?;
    let a = &out.attention;
    println!("agent 0 attends to opponents:");
    for (id, w) in a.opponent_ids.iter().zip(&a.psi) {
        println!("  agent {id}: {w:.4}");
    }
    for (k, round) in a.phi.iter().enumerate() {
        let pairs: Vec<String> = a.teammate_ids.iter().zip(round).map(|(id, w)| format!("{id}:{w:.4}")).collect();
        println!("teammate weights, round {}: {}", k + 1, pairs.join(" "));
    }
    let probs: Vec<String> = out.dist.move_probs().iter().map(|p| format!("{p:.3}")).collect();
    println!("movement probabilities [{}], trigger {:.3}, value {:.4}", probs.join(", "), out.dist.shoot_prob(), out.value);

    let mut shuffled: ObservationView = obs.clone();
    shuffled.opponents.reverse();
    shuffled.opponent_ids.reverse();
    shuffled.teammates.rotate_left(1);
    shuffled.teammate_ids.rotate_left(1);
    let again = forward(&shuffled, &params)?;
    let gap = out
        .dist
        .move_probs()
        .iter()
        .zip(again.dist.move_probs())
        .map(|(x, y)| (x - y).abs())
        .fold((out.value - again.value).abs(), f64::max);
    println!("largest change after reordering the neighbours: {gap:.2e}");
    Ok(())
}
