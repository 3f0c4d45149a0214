//! Emitted files read back through the crate's own readers.

use fogopt::milp::{export_lp, export_mps, formulate, read_lp, read_mps};
use fogopt::model::Tier;
use fogopt::runner::{emit, read_csv, read_json, run_sweep, solve_uniform, Format, SweepConfig, SolveReport};
use fogopt::scenario::Scenario;
use fogopt::solver::{solve_lp, solve_milp, solve_model, MilpOptions};
use fogopt::topology::{build_pon, Topology};
use fogopt::params::Parameters;

fn small_config() -> SweepConfig {
    SweepConfig {
        levels: vec![100.0, 1300.0],
        ..SweepConfig::default()
    }
}

#[test]
fn sweep_reports_round_trip() {
    let report = run_sweep(fogopt::topology::Backhaul::Pon, &small_config()).unwrap();
    let json = emit(&report, Format::Json).unwrap();
    let back = read_json(&json).unwrap();
    assert_eq!(back, report);
    assert_eq!(emit(&back, Format::Json).unwrap(), json);

    let csv = emit(&report, Format::Csv).unwrap();
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), report.levels.len() * Tier::ALL.len());
    for level in &report.levels {
        let at_level: Vec<_> = rows.iter().filter(|r| r.demand_mips == level.demand_mips).collect();
        let served: f64 = at_level.iter().map(|r| r.mips_served).sum();
        assert!((served - level.mips_served()).abs() < 1e-5);
        assert!(at_level.iter().all(|r| (r.tpc_w - level.tpc_w).abs() < 1e-5));
    }
}

#[test]
fn solve_report_round_trips() {
    let (report, _) = solve_uniform(fogopt::topology::Backhaul::Pon, 300.0, &SweepConfig::default()).unwrap();
    let text = report.to_json().unwrap();
    let back = SolveReport::read(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_json().unwrap(), text);
}

fn pon() -> Topology {
    build_pon(&Parameters::default()).unwrap()
}

#[test]
fn full_model_exports_read_back_to_the_same_optimum() {
    let topology = pon();
    let scenario = Scenario::uniform(&topology, 100.0, 0.6).unwrap();
    let problem = formulate(&topology, &scenario).unwrap();
    let direct = solve_milp(&problem, &MilpOptions::default()).unwrap();

    let mps = export_mps(&problem.model).unwrap();
    let from_mps = read_mps(&mps).unwrap();
    assert_eq!(export_mps(&from_mps).unwrap(), mps);

    let lp = export_lp(&problem.model).unwrap();
    let from_lp = read_lp(&lp).unwrap();
    assert_eq!(from_lp.rows.len(), problem.model.rows.len());
    assert_eq!(from_lp.num_vars(), problem.model.num_vars());

    // Names alone give the same relaxation and the same integer optimum.
    let relaxed = solve_lp(&problem.model).unwrap();
    assert!((solve_lp(&from_lp).unwrap().objective - relaxed.objective).abs() < 1e-6);
    let outcome = solve_model(&from_mps, &MilpOptions::default()).unwrap();
    assert!((outcome.objective - direct.objective).abs() <= 1e-6 * direct.objective);
}
