use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::observation_of;
use crate::policy::{forward, GraphConfig};
use crate::ppo::ScriptedConfig;

fn tiny_run() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.env.n_guards = 2;
    cfg.env.n_attackers = 2;
    cfg.env.episode_length = 20;
    cfg.graph = GraphConfig {
        d1: 4,
        d2: 4,
        k: 1,
        hidden_self: vec![8],
        hidden_opponent: vec![8],
        hidden_update: vec![8],
        hidden_policy: vec![8],
        hidden_value: vec![8],
    };
    cfg.ppo.steps_per_iteration = 40;
    cfg.ppo.minibatch_size = 32;
    cfg.ppo.epochs = 1;
    cfg.train.iterations = 2;
    cfg
}

fn params(cfg: &RunConfig, seed: u64) -> PolicyParams {
    PolicyParams::init(&cfg.graph, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn snapshot(team: TeamId, name: &str, weight: f64) -> StrategySnapshot {
    StrategySnapshot { team, checkpoint: PathBuf::from(name), iteration: 0, mean_reward: 0.0, label: String::new(), weight }
}

#[test]
fn monotone_curve_has_no_extrema() {
    let curve: Vec<f64> = (0..40).map(|i| i as f64 * 0.3).collect();
    assert!(detect_extrema(&curve, 2.0, 3).is_empty());
}

#[test]
fn triangular_peak_has_one_maximum_at_apex() {
    let curve: Vec<f64> = (0..41).map(|i| 20.0 - (i as f64 - 20.0).abs()).collect();
    assert_eq!(detect_extrema(&curve, 1.5, 4), vec![20]);
}

#[test]
fn noisy_two_peak_curve_finds_both_peaks() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let peaks = [30.0, 90.0];
    let window = 8;
    let curve: Vec<f64> = (0..120)
        .map(|i| {
            let x = i as f64;
            peaks.iter().map(|p| 5.0 * (-(x - p).powi(2) / (2.0 * 64.0)).exp()).sum::<f64>() + rng.gen_range(-0.3..0.3)
        })
        .collect();
    let found = detect_extrema(&curve, 3.0, window);
    for p in peaks {
        assert!(
            found.iter().any(|&i| (i as f64 - p).abs() <= window as f64 / 2.0),
            "peak {p} missing from {found:?}"
        );
    }
    // The valley between the peaks is a minimum.
    assert!(found.iter().any(|&i| (i as f64 - 60.0).abs() <= window as f64 / 2.0));
}

#[test]
fn manifest_round_trip_and_team_filter() {
    let cfg = tiny_run();
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("ck")).unwrap();
    for (i, name) in ["a0.bin", "a1.bin", "g0.bin"].iter().enumerate() {
        params(&cfg, i as u64).save(&dir.path().join("ck").join(name)).unwrap();
    }
    let snaps = vec![
        snapshot(TeamId::Attacker, "ck/a0.bin", 1.0),
        snapshot(TeamId::Attacker, "ck/a1.bin", 3.0),
        snapshot(TeamId::Guard, "ck/g0.bin", 1.0),
    ];
    let manifest = dir.path().join("library.toml");
    OpponentLibrary::write_manifest(&manifest, &snaps).unwrap();
    assert_eq!(read_manifest(&manifest).unwrap(), snaps);

    let lib = OpponentLibrary::load(&manifest, TeamId::Attacker).unwrap();
    assert_eq!(lib.len(), 2);
    assert_eq!(lib.team(), TeamId::Attacker);
    assert_eq!(lib.weights(), &[0.25, 0.75]);
    assert_eq!(lib.params()[1], params(&cfg, 1));
    assert!((lib.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn hand_written_manifest_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("lib.toml");
    std::fs::write(&manifest, "[[snapshot]]\ncheckpoint = \"x.bin\"\nteam = \"attacker\"\nlabel = \"sneak\"\n").unwrap();
    let s = read_manifest(&manifest).unwrap();
    assert_eq!(s[0].weight, 1.0);
    assert_eq!(s[0].label, "sneak");
    // The checkpoint itself is missing.
    assert!(matches!(OpponentLibrary::load(&manifest, TeamId::Attacker), Err(Error::Io { .. })));
    assert!(matches!(OpponentLibrary::load(&manifest, TeamId::Guard), Err(Error::Config { .. })));
    std::fs::write(&manifest, "[[snapshot]]\nteam = \"attacker\"\n").unwrap();
    assert!(matches!(read_manifest(&manifest), Err(Error::Format { .. })));
}

#[test]
fn library_rejects_mixed_teams_and_empty_sets() {
    let cfg = tiny_run();
    let mixed = vec![
        (snapshot(TeamId::Attacker, "a", 1.0), params(&cfg, 0)),
        (snapshot(TeamId::Guard, "g", 1.0), params(&cfg, 1)),
    ];
    assert!(matches!(OpponentLibrary::new(mixed), Err(Error::Config { .. })));
    assert!(matches!(OpponentLibrary::new(vec![]), Err(Error::Config { .. })));
}

#[test]
fn ensemble_rejects_a_library_of_the_training_team() {
    let cfg = tiny_run();
    let lib = OpponentLibrary::new(vec![(snapshot(TeamId::Guard, "g", 1.0), params(&cfg, 0))]).unwrap();
    let err = ensemble_train(&cfg, TeamId::Guard, &lib, None, None).unwrap_err();
    assert!(matches!(err, Error::Config { ref field, .. } if field == "library.team"), "{err}");
}

#[test]
fn single_member_library_equals_direct_frozen_training() {
    let cfg = tiny_run();
    let frozen = params(&cfg, 11);
    let lib = OpponentLibrary::new(vec![(snapshot(TeamId::Attacker, "a", 1.0), frozen.clone())]).unwrap();
    let init = params(&cfg, 12);
    let via_library = ensemble_train(&cfg, TeamId::Guard, &lib, Some(init.clone()), None).unwrap();
    let direct = crate::ppo::run(
        Trainer::with_roles(&cfg, Role::Learner(init), Role::fixed(Controller::policy(frozen))).unwrap(),
        &cfg,
        None,
    )
    .unwrap();
    assert_eq!(via_library.curve, direct.curve);
    assert_eq!(via_library.guard, direct.guard);
    assert!(via_library.attacker.is_none());
}

#[test]
fn ensemble_leaves_library_files_untouched_and_samples_every_member() {
    let mut cfg = tiny_run();
    cfg.train.iterations = 3;
    let dir = tempfile::tempdir().unwrap();
    let mut snaps = Vec::new();
    for i in 0..3 {
        let name = format!("a{i}.bin");
        params(&cfg, 20 + i).save(&dir.path().join(&name)).unwrap();
        snaps.push(snapshot(TeamId::Attacker, &name, 1.0));
    }
    let manifest = dir.path().join("library.toml");
    OpponentLibrary::write_manifest(&manifest, &snaps).unwrap();
    let before: Vec<Vec<u8>> = (0..3).map(|i| std::fs::read(dir.path().join(format!("a{i}.bin"))).unwrap()).collect();
    let lib = OpponentLibrary::load(&manifest, TeamId::Attacker).unwrap();
    let report = ensemble_train(&cfg, TeamId::Guard, &lib, None, None).unwrap();
    let after: Vec<Vec<u8>> = (0..3).map(|i| std::fs::read(dir.path().join(format!("a{i}.bin"))).unwrap()).collect();
    assert_eq!(before, after);
    assert_eq!(report.curve.len(), 6);
}

#[test]
fn zero_episode_evaluation_is_an_error() {
    let cfg = tiny_run();
    let err = evaluate_matchup(&cfg.env, &cfg.reward, &Controller::Random, &Controller::Random, 0, 0).unwrap_err();
    assert!(matches!(err, Error::Config { .. }));
}

#[test]
fn evaluation_is_deterministic_and_bounded() {
    let cfg = tiny_run();
    let g = Controller::policy(params(&cfg, 1));
    let a = Controller::policy(params(&cfg, 2));
    let r1 = evaluate_matchup(&cfg.env, &cfg.reward, &g, &a, 10, 3).unwrap();
    let r2 = evaluate_matchup(&cfg.env, &cfg.reward, &g, &a, 10, 3).unwrap();
    assert_eq!(r1, r2);
    assert_eq!(r1.results.len(), 10);
    assert!((0.0..=1.0).contains(&r1.win_rate));
    assert_eq!(r1.win_rate, r1.guard_wins as f64 / 10.0);
}

#[test]
fn aimed_guards_beat_random_guards() {
    let mut cfg = tiny_run();
    cfg.env.episode_length = 100;
    let attacker = Controller::Scripted(ScriptedConfig::default());
    let aimed = Controller::Scripted(ScriptedConfig { aggression: 1.0, shoot_prob: 0.0 });
    let aimed = evaluate_matchup(&cfg.env, &cfg.reward, &aimed, &attacker, 100, 4).unwrap();
    let random = evaluate_matchup(&cfg.env, &cfg.reward, &Controller::Random, &attacker, 100, 4).unwrap();
    assert!(aimed.win_rate > random.win_rate, "{} vs {}", aimed.win_rate, random.win_rate);
    // Paired: both ran the same episode seeds.
    assert!(aimed.results.iter().zip(&random.results).all(|(a, b)| a.seed == b.seed));
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let cfg = tiny_run();
    let p = params(&cfg, 30);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    p.save(&path).unwrap();
    let q = PolicyParams::load(&path).unwrap();
    let state = crate::env::reset(&cfg.env, 1).unwrap();
    for agent in 0..4 {
        let obs = observation_of(agent, &state, &cfg.env);
        let (a, b) = (forward(&obs, &p).unwrap(), forward(&obs, &q).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.dist, b.dist);
    }
}
