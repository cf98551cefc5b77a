//! Reads the `curve.tsv` of a run directory, smooths each team's reward curve and lists
//! the local extrema that the trainer would checkpoint.
//!
//! ```text
//! cargo run --release --example selfplay -- /tmp/run
//! cargo run --release --example reward_curves -- /tmp/run
//! ```

use std::collections::BTreeMap;

use fortattack::curriculum::detect_extrema;
use fortattack::replay::smooth_curve;

fn main() {
    let Some(dir) = std::env::args().nth(1) else {
        eprintln!("usage: reward_curves <run_dir> [sigma] [window]");
        std::process::exit(2);
    };
    let sigma: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(2.0);
    let window: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let text = std::fs::read_to_string(std::path::Path::new(&dir).join("curve.tsv")).expect("readable curve.tsv");

    let mut curves: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split('\t').collect();
        curves.entry(cols[1].to_string()).or_default().push(cols[2].parse().expect("numeric reward"));
    }
    for (team, raw) in &curves {
        let smooth = smooth_curve(raw, sigma);
        println!("{team}:");
        for (i, (r, s)) in raw.iter().zip(&smooth).enumerate() {
            println!("  {i:4} {r:+8.3} {s:+8.3} {}", "#".repeat(((s + 12.0).max(0.0) * 2.0) as usize));
        }
        println!("  extrema at {:?}", detect_extrema(raw, sigma, window));
    }
}
