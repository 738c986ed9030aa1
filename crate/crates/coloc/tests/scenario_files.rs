//! The shipped scenario files stay in lockstep with the built-in defaults.

use std::path::Path;

use coloc::harness::{default_scenario, Scenario};

fn scenarios_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn default_file_matches_builtin() {
    let text = std::fs::read_to_string(scenarios_dir().join("default.toml")).unwrap();
    let parsed = Scenario::from_toml(&text).unwrap();
    assert_eq!(parsed, default_scenario());
}

#[test]
fn example_files_validate() {
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path).unwrap();
            Scenario::from_toml(&text)
                .unwrap_or_else(|e| panic!("{} failed to parse: {e}", path.display()));
        }
    }
}
