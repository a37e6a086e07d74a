use proptest::prelude::*;
use s2rtbp::config::Overrides;
use s2rtbp::contact::AlphaMode;
use s2rtbp::RunConfig;

#[test]
fn default_toml_parses_back() {
    let cfg = RunConfig::from_toml(&RunConfig::default_toml()).unwrap();
    assert_eq!(cfg.to_toml().unwrap(), RunConfig::default().to_toml().unwrap());
}

#[test]
fn partial_config_is_rejected() {
    assert!(RunConfig::from_toml("command = \"hill\"\n").is_err());
}

#[test]
fn golden_takes_no_energy() {
    let mut cfg = RunConfig::default();
    let o = Overrides { energy: Some(-2.0), ..Default::default() };
    assert!(cfg.apply(&o, "golden").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overridden_config_round_trips(seed in any::<u64>(), grid in 64usize..2048, energy in -4.0..-1.1f64, paper in any::<bool>()) {
        let mut cfg = RunConfig::default();
        let o = Overrides {
            seed: Some(seed),
            grid: Some(grid),
            energy: Some(energy),
            alpha_mode: Some(if paper { AlphaMode::Paper } else { AlphaMode::Strict }),
            ..Default::default()
        };
        cfg.apply(&o, "hill").unwrap();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back.to_toml().unwrap(), text);
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(back.hill.grid.cells, grid);
    }
}
