//! End-to-end runs of the `mpngame` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpngame"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses the value printed after `label` on some line of `text`.
fn printed_value(text: &str, label: &str) -> f64 {
    let line = text.lines().find(|l| l.contains(label)).expect(label);
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn example_cyclic_prints_the_network() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("cyclic.json");
    let out = run(&["example-cyclic", "--out", path_str(&spec)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("nodes: 9"), "{text}");
    assert!(text.contains("edges: 12 (6 temporal, 6 observation)"), "{text}");
    for (from, to) in [
        ("(2,1)", "(1,2)"),
        ("(2,2)", "(1,3)"),
        ("(3,1)", "(2,2)"),
        ("(3,2)", "(2,3)"),
        ("(1,1)", "(3,2)"),
        ("(1,2)", "(3,3)"),
    ] {
        assert!(text.contains(&format!("{from} -> {to} observation")), "{from} -> {to}");
    }
    assert!(spec.exists());
}

#[test]
fn example_cyclic_single_stage() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("c.json");
    let out = run(&["example-cyclic", "--horizon", "1", "--out", path_str(&spec)]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("nodes: 3"), "{text}");
    assert!(text.contains("edges: 0"), "{text}");
}

#[test]
fn emitted_spec_solves() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("c.json");
    assert_eq!(code(&run(&["example-cyclic", "--x1", "1,0,-1", "--out", path_str(&spec)])), 0);
    let out = run(&["solve", "--spec", path_str(&spec)]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    assert!(stdout(&out).contains("verification passed"));
}

#[test]
fn shipped_cyclic_spec_matches_the_generator() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("c.json");
    assert_eq!(code(&run(&["example-cyclic", "--x1", "1,0,-1", "--out", path_str(&spec)])), 0);
    let fresh = std::fs::read_to_string(&spec).unwrap();
    let shipped = std::fs::read_to_string(shipped("cyclic.json")).unwrap();
    assert_eq!(fresh, shipped);
}

#[test]
fn solve_writes_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let (sol, csv) = (dir.path().join("sol.json"), dir.path().join("traj.csv"));
    let spec = shipped("cyclic.json");
    let out = run(&[
        "solve",
        "--spec",
        path_str(&spec),
        "--x1",
        "1,0,-1",
        "--out",
        path_str(&sol),
        "--csv",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    for key in ["trajectory", "policies", "multipliers", "costs", "diagnostics", "verification", "graph"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["verification"]["passed"], serde_json::Value::Bool(true));
    assert_eq!(json["graph"]["edges"].as_array().unwrap().len(), 12);
    let entry = &json["policies"]["entries"][0][0];
    for key in ["gain", "feedforward", "mask", "masked_jacobian"] {
        assert!(entry.get(key).is_some(), "policy missing {key}");
    }

    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x[1],x[2],x[3],u1[1],u2[1],u3[1]");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1,1.0000000000000000e0,0.0000000000000000e0,-1.0000000000000000e0,"));
    assert!(lines[4].starts_with("4,") && lines[4].ends_with(",,,"));
}

#[test]
fn solve_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let spec = shipped("coupled_pair.json");
    let paths: Vec<PathBuf> = (0..2).map(|k| dir.path().join(format!("s{k}.json"))).collect();
    for p in &paths {
        assert_eq!(code(&run(&["solve", "--spec", path_str(&spec), "--out", path_str(p)])), 0);
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
}

#[test]
fn verify_round_trip_and_sensitivity() {
    let dir = TempDir::new().unwrap();
    let spec = shipped("cyclic.json");
    let sol = dir.path().join("sol.json");
    assert_eq!(code(&run(&["solve", "--spec", path_str(&spec), "--out", path_str(&sol)])), 0);
    let out = run(&["verify", "--spec", path_str(&spec), "--solution", path_str(&sol)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));

    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    json["trajectory"]["controls"][1][2][0] = serde_json::json!(0.0);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, serde_json::to_string(&json).unwrap()).unwrap();
    let out = run(&["verify", "--spec", path_str(&spec), "--solution", path_str(&broken)]);
    assert_eq!(code(&out), 2);
    let text = stdout(&out);
    assert!(text.contains("verification FAILED"), "{text}");
    assert!(text.contains("not a rollout"), "{text}");
}

#[test]
fn verify_rejects_mismatched_dims() {
    let dir = TempDir::new().unwrap();
    let sol = dir.path().join("sol.json");
    let pair = shipped("coupled_pair.json");
    assert_eq!(code(&run(&["solve", "--spec", path_str(&pair), "--out", path_str(&sol)])), 0);
    let out = run(&["verify", "--spec", path_str(&shipped("cyclic.json")), "--solution", path_str(&sol)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("does not match"), "{}", stderr(&out));
}

#[test]
fn malformed_json_names_the_field() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("bad.json");
    let text = std::fs::read_to_string(shipped("coupled_pair.json"))
        .unwrap()
        .replace(r#""horizon": 3"#, r#""horizon": "three""#);
    std::fs::write(&spec, text).unwrap();
    let out = run(&["solve", "--spec", path_str(&spec)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("`horizon`"), "{}", stderr(&out));

    std::fs::write(&spec, "{\"num_agents\": 2,").unwrap();
    assert_eq!(code(&run(&["solve", "--spec", path_str(&spec)])), 1);
}

#[test]
fn zero_own_control_weight_is_rejected() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("r0.json");
    let text = std::fs::read_to_string(shipped("coupled_pair.json"))
        .unwrap()
        .replace(r#""r": [{"constant": [[1.0]]}, null]"#, r#""r": [{"constant": [[0.0]]}, null]"#);
    std::fs::write(&spec, text).unwrap();
    let out = run(&["solve", "--spec", path_str(&spec)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("R^{ii} not positive definite"), "{}", stderr(&out));
}

#[test]
fn missing_initial_state_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("c.json");
    assert_eq!(code(&run(&["example-cyclic", "--out", path_str(&spec)])), 0);
    let out = run(&["solve", "--spec", path_str(&spec)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--x1"));
    let out = run(&["solve", "--spec", path_str(&spec), "--x1", "1,2"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn compare_decoupled_game_agrees() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("dec.json");
    let out = run(&["example-cyclic", "--pair-weight", "0", "--out", path_str(&spec)]);
    assert_eq!(code(&out), 0);
    let table = dir.path().join("table.json");
    let out = run(&[
        "compare",
        "--spec",
        path_str(&spec),
        "--structures",
        "openloop,feedback,spec,cyclic",
        "--x1",
        "0.3,-1.2,2",
        "--out",
        path_str(&table),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(printed_value(&stdout(&out), "max pairwise difference") < 1e-9);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&table).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
    assert_eq!(json["differences"].as_array().unwrap().len(), 6);
}

#[test]
fn compare_coupled_game_shows_a_gap() {
    let spec = shipped("coupled_pair.json");
    let out = run(&["compare", "--spec", path_str(&spec), "--structures", "openloop,feedback"]);
    assert_eq!(code(&out), 0);
    assert!(printed_value(&stdout(&out), "openloop vs feedback") > 1e-6);
}

#[test]
fn unknown_structure_prints_usage() {
    let out = run(&["compare", "--spec", "x.json", "--structures", "openloop,sideways"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("sideways"), "{err}");
    assert!(err.contains("Usage: mpngame compare"), "{err}");
}
