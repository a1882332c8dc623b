use expsplit::config::{Config, Overrides};
use expsplit::registry::{EntryKind, REGISTRY};
use expsplit::Error;

#[test]
fn shipped_configs_round_trip() {
    for e in REGISTRY {
        let cfg = e.config().unwrap();
        let again = Config::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{}", e.id);
        if e.kind == EntryKind::Study {
            let plan = cfg.build_plan(Some(2)).unwrap();
            assert!(plan.steps.windows(2).all(|w| w[1] == 2 * w[0]));
        } else {
            assert!(cfg.build_problem().is_ok());
        }
    }
}

#[test]
fn overrides_validated_like_file_values() {
    let cfg = REGISTRY.iter().find(|e| e.id == "heat-torus-1d").unwrap().config().unwrap();
    let bad = Overrides { h: Some(0.3), ..Default::default() };
    assert!(matches!(cfg.clone().with_overrides(&bad), Err(Error::Config(_))));
    let bad = Overrides { grid: Some(100), ..Default::default() };
    assert!(matches!(cfg.clone().with_overrides(&bad), Err(Error::Config(_))));
    let bad = Overrides { s: Some(0), ..Default::default() };
    assert!(cfg.clone().with_overrides(&bad).is_err());
    let good = Overrides { horizon: Some(1.0), h: Some(0.125), ..Default::default() };
    let c = cfg.with_overrides(&good).unwrap();
    assert_eq!(c.run.steps().unwrap(), 8);
    let text = c.to_toml();
    assert_eq!(Config::parse(&text).unwrap(), c);
}

#[test]
fn infinite_exponents_survive_round_trip() {
    let cfg = REGISTRY.iter().find(|e| e.id == "heat-cubic-frac").unwrap().config().unwrap();
    let text = cfg.to_toml();
    assert!(text.contains("\"inf\""));
    assert_eq!(Config::parse(&text).unwrap(), cfg);
}
