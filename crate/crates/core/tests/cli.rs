//! End-to-end runs of the `fogopt` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fogopt::config::RunConfig;
use fogopt::milp::read_mps;
use fogopt::params::Parameters;
use fogopt::runner::{read_csv, SolveReport};
use fogopt::solver::MilpStatus;

fn fogopt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fogopt"))
        .args(args)
        .current_dir(dir)
        .env("FOGOPT_THREADS", "2")
        .output()
        .expect("run fogopt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_writes_an_optimal_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = fogopt(&["solve", "--topology", "pon", "--demand", "100", "--export-mps", "model.mps", "--export-lp", "model.lp"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("tpc_w "));

    let report = SolveReport::read(&fs::read_to_string(dir.path().join("solution.json")).unwrap()).unwrap();
    assert_eq!(report.status, MilpStatus::Optimal);
    assert_eq!(report.placements.len(), 16);
    assert!(report.feasible);

    let model = read_mps(&fs::read_to_string(dir.path().join("model.mps")).unwrap()).unwrap();
    assert!(model.num_vars() > 0);
    assert!(fs::read_to_string(dir.path().join("model.lp")).unwrap().contains("Subject To"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fogopt(&["solve", "--demand", "-5"], dir.path()).status.code(), Some(2));
    assert_eq!(fogopt(&["solve", "--topology", "ring"], dir.path()).status.code(), Some(2));
    assert_eq!(fogopt(&["solve", "--demand", "7000"], dir.path()).status.code(), Some(3));
    assert_eq!(fogopt(&["solve", "--config", "missing.json"], dir.path()).status.code(), Some(2));
    assert_eq!(fogopt(&[], dir.path()).status.code(), Some(2));

    fs::write(dir.path().join("typo.json"), r#"{"solver": {"gapp": 0.1}}"#).unwrap();
    assert_eq!(fogopt(&["solve", "--config", "typo.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), r#"{"topology": "spine-leaf", "demand": 200, "output": {"out_dir": "out"}}"#).unwrap();
    let out = fogopt(&["solve", "--config", "run.json", "--ddr", "0.3"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = SolveReport::read(&fs::read_to_string(dir.path().join("out/solution.json")).unwrap()).unwrap();
    assert_eq!(report.demand_mips, 200.0);
    assert_eq!(report.ddr, 0.3);
}

#[test]
fn print_defaults_is_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = fogopt(&["--print-defaults"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let config = RunConfig::from_json(&stdout(&out)).unwrap();
    assert_eq!(config.parameters().unwrap(), Parameters::default());
}

#[test]
fn single_level_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = fogopt(&["sweep", "--topology", "pon", "--levels", "100", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&fs::read_to_string(dir.path().join("pon.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.demand_mips == 100.0));
    assert!(dir.path().join("pon.json").exists());
}

#[test]
fn compare_writes_both_reports_and_savings() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--compare", "--levels", "100,700,1300", "--out-dir", "cmp"];
    let out = fogopt(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = dir.path().join("cmp");
    let files: Vec<String> = ["pon.csv", "spine_leaf.csv", "savings.json"]
        .iter()
        .map(|f| fs::read_to_string(cmp.join(f)).unwrap())
        .collect();
    let savings: serde_json::Value = serde_json::from_str(&files[2]).unwrap();
    assert!(savings["networking_saving_percent"].as_f64().unwrap() > 0.0);

    // Same document, same bytes.
    let again = fogopt(&args, dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout(&again), stdout(&out));
    for (f, before) in ["pon.csv", "spine_leaf.csv", "savings.json"].iter().zip(&files) {
        assert_eq!(&fs::read_to_string(cmp.join(f)).unwrap(), before);
    }
}

#[test]
fn verify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--instances", "50", "--seed", "7"];
    let first = fogopt(&args, dir.path());
    let second = fogopt(&args, dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).contains("50/50"));
}

#[test]
fn verify_catches_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = fogopt(&["verify", "--instances", "50", "--seed", "7", "--inject-fault"], dir.path());
    assert_eq!(out.status.code(), Some(5));
    // The failing instance is dumped as JSON on stderr.
    let stderr = String::from_utf8_lossy(&out.stderr);
    let json_end = stderr.rfind('}').unwrap();
    let dump: serde_json::Value = serde_json::from_str(&stderr[..=json_end]).unwrap();
    assert!(dump["instance"]["topology"].is_object());
}
