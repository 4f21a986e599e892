#![allow(dead_code)]

use std::path::PathBuf;

use lasercom::engine::{load_scenario, Scenario};

pub const CANNED: [&str; 7] = [
    "drone_trial",
    "edfa_endurance",
    "geo_ground_hicali",
    "haps_ground_st",
    "leo_geo_fx",
    "leo_ground_st",
    "leo_pass_clear",
];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.json"))
}

pub fn scenario_text(name: &str) -> String {
    std::fs::read_to_string(scenario_path(name)).expect("canned scenario readable")
}

pub fn canned(name: &str) -> Scenario {
    load_scenario(&scenario_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}
