use std::path::PathBuf;

use hwsir::scenario::{Horizon, Scenario};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn shipped_table_files_match_the_builtin_ladder() {
    for expected in Scenario::table1() {
        let path = dir().join(format!("{}.toml", expected.name));
        let loaded = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(loaded, expected);
    }
}

#[test]
fn default_scenario_resolves_an_auto_horizon() {
    let sc = Scenario::load(&dir().join("default.toml")).unwrap();
    assert_eq!(sc.horizon, Horizon::Auto(hwsir::scenario::AutoKeyword::Auto));
    let h = sc.resolve_horizon().unwrap();
    assert_eq!(h % 5.0, 0.0);
    assert!(h > 0.0);
}
