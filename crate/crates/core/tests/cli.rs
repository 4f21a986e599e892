mod common;

use std::process::{Command, Output};

use common::scenario_path;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sim"))
        .args(args)
        .output()
        .expect("sim runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn profiles_table_and_json() {
    let o = sim(&["profiles"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["HICALI", "FX", "ST"] {
        assert!(text.contains(name), "{text}");
    }
    let o = sim(&["profiles", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let apertures: Vec<f64> = v.as_array().unwrap().iter().map(|p| p["aperture_m"].as_f64().unwrap()).collect();
    assert_eq!(apertures, vec![0.15, 0.09, 0.03]);
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("series.csv");
    let json = dir.path().join("report.json");
    let events = dir.path().join("events.csv");
    let scenario = scenario_path("leo_pass_clear");
    let o = sim(&[
        "run",
        scenario.to_str().unwrap(),
        "--seed",
        "42",
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--events",
        events.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("leo-ogs"));
    let series = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        series.lines().next().unwrap(),
        "t_s,link_id,phase,range_m,elevation_deg,rx_power_dbm,margin_db,fade_db,frame_ok,buffer_bits"
    );
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["seed"], 42);
    assert!(report["links"][0]["availability"].as_f64().unwrap() > 0.9);
    let ev = std::fs::read_to_string(&events).unwrap();
    assert!(ev.contains("Communicating"));
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "x", "time": {"t0_s": 0, "t1_s": 1}, "platforms": [], "links": [{"a": "p", "b": "sat9", "direction": "one_way"}]}"#).unwrap();
    let o = sim(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sat9"), "{err}");

    let o = sim(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn passes_and_budget() {
    let scenario = scenario_path("leo_pass_clear");
    let o = sim(&["passes", scenario.to_str().unwrap(), "--link", "leo-ogs"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("1 passes"));

    let o = sim(&["budget", scenario.to_str().unwrap(), "--link", "leo-ogs", "--at", "500"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("geometric_coupling_flat_top") && text.contains("margin"), "{text}");

    let o = sim(&["budget", scenario.to_str().unwrap(), "--link", "leo-ogs", "--at", "5000"]);
    assert_eq!(o.status.code(), Some(2), "no line of sight");
    let o = sim(&["budget", scenario.to_str().unwrap(), "--link", "ogs-leo", "--at", "500"]);
    assert_eq!(o.status.code(), Some(2), "unknown link");
}

#[test]
fn sweep_prints_one_row_per_value() {
    let scenario = scenario_path("leo_pass_clear");
    let o = sim(&[
        "sweep",
        scenario.to_str().unwrap(),
        "--param",
        "platforms.leo.terminal.tx_power_nominal_w",
        "--values",
        "1,2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = sim(&["sweep", scenario.to_str().unwrap(), "--param", "no.such.path", "--values", "1"]);
    assert_eq!(o.status.code(), Some(2));
}
