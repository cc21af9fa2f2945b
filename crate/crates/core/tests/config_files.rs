use gardner::config::*;
use gardner::engine::Color;
use gardner::net::optim::OptimizerKind;
use proptest::prelude::*;

#[test]
fn snapshots_reload_to_equal_configs() {
    let dir = tempfile::tempdir().unwrap();
    for name in PRESETS {
        let cfg = RunConfig::preset(name).unwrap();
        let path = cfg.write_snapshot(dir.path()).unwrap();
        assert_eq!(path.file_name().unwrap(), SNAPSHOT);
        let back = RunConfig::load(path.to_str().unwrap()).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn nested_keys_override_defaults() {
    let cfg = RunConfig::from_toml(
        "seed = 4\n[ppo]\ngamma = 0.7\noptimizer = \"adam\"\n[pretrain]\nrole = \"black\"\n[network]\nchannels = 16\n",
    )
    .unwrap();
    assert_eq!(cfg.seed, 4);
    assert_eq!(cfg.ppo.gamma, 0.7);
    assert_eq!(cfg.ppo.optimizer, OptimizerKind::Adam);
    assert_eq!(cfg.ppo.lambda, RunConfig::default().ppo.lambda);
    assert_eq!(cfg.pretrain.role, Color::Black);
    assert_eq!(cfg.network.channels, 16);
    assert!(RunConfig::from_toml("[ppo]\ngama = 0.7\n").is_err());
    assert!(RunConfig::from_toml("[ppo]\nminibatch = 300\n").is_err());
    assert!(RunConfig::from_toml("[selfplay]\nepsilon = 1.5\n").is_err());
}

proptest! {
    #[test]
    fn edited_configs_round_trip(
        seed in any::<u64>(),
        gamma in 0.0f64..=1.0,
        lambda in 0.0f64..=1.0,
        clip in 0.01f64..1.0,
        iterations in 0u32..50,
        games in 1u64..100_000,
    ) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.ppo.gamma = gamma;
        cfg.ppo.lambda = lambda;
        cfg.ppo.clip_ratio = clip;
        cfg.selfplay.iterations = iterations;
        cfg.arena.games = games;
        prop_assert!(cfg.validate().is_ok());
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
