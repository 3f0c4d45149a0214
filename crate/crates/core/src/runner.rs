//! Demand sweeps over the two backhauls, savings comparison, and CSV/JSON
//! reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::milp::{check_feasible, formulate_with, Candidate, FormulationOptions, MilpProblem, FEASIBILITY_TOLERANCE};
use crate::model::{Solution, Tier};
use crate::params::Parameters;
use crate::scenario::Scenario;
use crate::solver::{solve_milp, MilpOptions, MilpStatus};
use crate::topology::{build_pon, build_spine_leaf, Backhaul, Topology};

/// Environment variable capping the number of levels solved at once.
pub const THREADS_ENV: &str = "FOGOPT_THREADS";

/// 100, 200, ..., 1500 MIPS.
pub fn default_levels() -> Vec<f64> {
    (1..=15).map(|i| i as f64 * 100.0).collect()
}

/// Builds the topology for one of the two reference backhauls.
pub fn build_topology(backhaul: Backhaul, parameters: &Parameters) -> Result<Topology> {
    match backhaul {
        Backhaul::Pon => build_pon(parameters),
        Backhaul::SpineLeaf => build_spine_leaf(parameters),
        Backhaul::Custom => Err(Error::Config("a sweep needs the pon or spine_leaf backhaul".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub parameters: Parameters,
    /// The override document the parameters were built from, kept for the
    /// report.
    pub overrides: Value,
    pub levels: Vec<f64>,
    pub seed: u64,
    pub milp: MilpOptions,
    pub formulation: FormulationOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            parameters: Parameters::default(),
            overrides: Value::Object(Default::default()),
            levels: default_levels(),
            seed: 0,
            milp: MilpOptions::default(),
            formulation: FormulationOptions::default(),
        }
    }
}

/// Outcome of one demand level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub demand_mips: f64,
    /// Solver status, or `"error"` when the level could not be solved.
    pub status: String,
    /// MIPS served per tier, every tier present.
    pub tier_mips: BTreeMap<Tier, f64>,
    pub p_processing_w: f64,
    pub p_networking_w: f64,
    pub tpc_w: f64,
    pub nodes: usize,
    pub feasible: bool,
    pub max_violation: f64,
    /// Largest LP certificate measure over the level's node solves.
    pub worst_certificate: f64,
    pub certificate_failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LevelResult {
    fn failed(demand_mips: f64, status: &str, error: String) -> Self {
        Self {
            demand_mips,
            status: status.into(),
            tier_mips: Tier::ALL.iter().map(|&t| (t, 0.0)).collect(),
            p_processing_w: 0.0,
            p_networking_w: 0.0,
            tpc_w: 0.0,
            nodes: 0,
            feasible: false,
            max_violation: 0.0,
            worst_certificate: 0.0,
            certificate_failures: 0,
            error: Some(error),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal.as_str()
    }

    pub fn mips_served(&self) -> f64 {
        self.tier_mips.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub topology: Backhaul,
    pub ddr: f64,
    pub seed: u64,
    pub overrides: Value,
    pub levels: Vec<LevelResult>,
}

impl SweepReport {
    pub fn all_optimal(&self) -> bool {
        self.levels.iter().all(LevelResult::is_optimal)
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("at least one demand level is required".into()));
    }
    if let Some(bad) = levels.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::Config(format!("demand level {bad} must be positive")));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("demand levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Solves one uniform demand level on a built topology.
pub fn solve_level(topology: &Topology, demand_mips: f64, config: &SweepConfig) -> LevelResult {
    let scenario = match Scenario::uniform(topology, demand_mips, config.parameters.ddr) {
        Ok(s) => s,
        Err(e) => return LevelResult::failed(demand_mips, "error", e.to_string()),
    };
    let problem = match formulate_with(topology, &scenario, config.formulation) {
        Ok(p) => p,
        Err(e @ Error::Infeasible(_)) => return LevelResult::failed(demand_mips, "infeasible", e.to_string()),
        Err(e) => return LevelResult::failed(demand_mips, "error", e.to_string()),
    };
    let result = match solve_milp(&problem, &config.milp) {
        Ok(r) => r,
        Err(e) => return LevelResult::failed(demand_mips, "error", e.to_string()),
    };
    let Some(solution) = result.solution else {
        let mut level = LevelResult::failed(demand_mips, result.status.as_str(), "no feasible assignment".into());
        level.nodes = result.nodes;
        level.worst_certificate = result.worst_certificate;
        level.certificate_failures = result.certificate_failures;
        return level;
    };
    let mut tier_mips: BTreeMap<Tier, f64> = Tier::ALL.iter().map(|&t| (t, 0.0)).collect();
    for (&task, &node) in &solution.assignment {
        *tier_mips.get_mut(&topology.processing_nodes[node].tier).expect("every tier present") +=
            scenario.tasks[task].processing_demand;
    }
    let audit = check_feasible(&problem, &Candidate::from_solution(&solution, &scenario));
    LevelResult {
        demand_mips,
        status: result.status.as_str().into(),
        tier_mips,
        p_processing_w: solution.power.processing_power,
        p_networking_w: solution.power.networking_power,
        tpc_w: solution.power.tpc,
        nodes: result.nodes,
        feasible: audit.feasible && audit.max_violation <= FEASIBILITY_TOLERANCE,
        max_violation: audit.max_violation,
        worst_certificate: result.worst_certificate,
        certificate_failures: result.certificate_failures,
        error: None,
    }
}

/// Where one task went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub task: usize,
    pub user: String,
    pub node: String,
    pub tier: Tier,
    pub mips: f64,
}

/// Full record of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub topology: Backhaul,
    pub demand_mips: f64,
    pub ddr: f64,
    pub status: MilpStatus,
    pub objective: Option<f64>,
    pub bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub worst_certificate: f64,
    pub certificate_failures: usize,
    pub feasible: bool,
    pub max_violation: f64,
    pub placements: Vec<Placement>,
    pub active_nodes: Vec<String>,
    pub active_devices: Vec<String>,
    pub solution: Option<Solution>,
}

impl SolveReport {
    pub fn read(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Formulates and solves one uniform demand level, returning the problem
/// too so it can be exported.
pub fn solve_uniform(
    backhaul: Backhaul,
    demand_mips: f64,
    config: &SweepConfig,
) -> Result<(SolveReport, MilpProblem)> {
    let topology = build_topology(backhaul, &config.parameters)?;
    let scenario = Scenario::uniform(&topology, demand_mips, config.parameters.ddr)?;
    let problem = formulate_with(&topology, &scenario, config.formulation)?;
    let result = solve_milp(&problem, &config.milp)?;
    let mut report = SolveReport {
        topology: backhaul,
        demand_mips,
        ddr: scenario.ddr,
        status: result.status,
        objective: result.solution.as_ref().map(|_| result.objective),
        bound: result.bound,
        nodes: result.nodes,
        lp_iterations: result.lp_iterations,
        worst_certificate: result.worst_certificate,
        certificate_failures: result.certificate_failures,
        feasible: false,
        max_violation: 0.0,
        placements: Vec::new(),
        active_nodes: Vec::new(),
        active_devices: Vec::new(),
        solution: None,
    };
    if let Some(solution) = result.solution {
        let audit = check_feasible(&problem, &Candidate::from_solution(&solution, &scenario));
        report.feasible = audit.feasible;
        report.max_violation = audit.max_violation;
        report.placements = solution
            .assignment
            .iter()
            .map(|(&k, &d)| {
                let task = &scenario.tasks[k];
                let node = &topology.processing_nodes[d];
                Placement {
                    task: k,
                    user: topology.users[task.source].id.clone(),
                    node: node.id.clone(),
                    tier: node.tier,
                    mips: task.processing_demand,
                }
            })
            .collect();
        report.active_nodes = solution.active_nodes.iter().map(|&d| topology.processing_nodes[d].id.clone()).collect();
        report.active_devices = solution.active_devices.iter().map(|&v| topology.devices[v].id.clone()).collect();
        report.solution = Some(solution);
    }
    Ok((report, problem))
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Solves every level of `config` on `backhaul`. Levels that fail are
/// recorded and the sweep continues.
pub fn run_sweep(backhaul: Backhaul, config: &SweepConfig) -> Result<SweepReport> {
    check_levels(&config.levels)?;
    let topology = build_topology(backhaul, &config.parameters)?;
    let solve = || -> Vec<LevelResult> {
        config.levels.par_iter().map(|&l| solve_level(&topology, l, config)).collect()
    };
    let levels = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("{THREADS_ENV}: {e}")))?
            .install(solve),
        None => solve(),
    };
    Ok(SweepReport {
        topology: backhaul,
        ddr: config.parameters.ddr,
        seed: config.seed,
        overrides: config.overrides.clone(),
        levels,
    })
}

/// Spine-and-leaf minus PON at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDelta {
    pub demand_mips: f64,
    pub networking_w: f64,
    pub processing_w: f64,
    pub tpc_w: f64,
    pub networking_saving_percent: f64,
    pub processing_saving_percent: f64,
}

/// Savings of PON relative to spine-and-leaf, aggregated over the sweep
/// with equal dwell at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Savings {
    pub networking_saving_percent: f64,
    pub processing_saving_percent: f64,
    pub tpc_saving_percent: f64,
    pub per_level: Vec<LevelDelta>,
}

fn saving(reference: f64, candidate: f64) -> f64 {
    if reference == 0.0 {
        0.0
    } else {
        (reference - candidate) / reference * 100.0
    }
}

pub fn compare(pon: &SweepReport, spine_leaf: &SweepReport) -> Result<Savings> {
    let a: Vec<f64> = pon.levels.iter().map(|l| l.demand_mips).collect();
    let b: Vec<f64> = spine_leaf.levels.iter().map(|l| l.demand_mips).collect();
    if a != b {
        return Err(Error::Comparison(format!("levels differ: {a:?} vs {b:?}")));
    }
    if pon.ddr != spine_leaf.ddr {
        return Err(Error::Comparison(format!("ddr differs: {} vs {}", pon.ddr, spine_leaf.ddr)));
    }
    if let Some(l) = pon.levels.iter().chain(&spine_leaf.levels).find(|l| l.error.is_some()) {
        return Err(Error::Comparison(format!("level {} has no solution", l.demand_mips)));
    }
    let total = |r: &SweepReport, f: fn(&LevelResult) -> f64| r.levels.iter().map(f).sum::<f64>();
    let per_level = pon
        .levels
        .iter()
        .zip(&spine_leaf.levels)
        .map(|(p, s)| LevelDelta {
            demand_mips: p.demand_mips,
            networking_w: s.p_networking_w - p.p_networking_w,
            processing_w: s.p_processing_w - p.p_processing_w,
            tpc_w: s.tpc_w - p.tpc_w,
            networking_saving_percent: saving(s.p_networking_w, p.p_networking_w),
            processing_saving_percent: saving(s.p_processing_w, p.p_processing_w),
        })
        .collect();
    Ok(Savings {
        networking_saving_percent: saving(total(spine_leaf, |l| l.p_networking_w), total(pon, |l| l.p_networking_w)),
        processing_saving_percent: saving(total(spine_leaf, |l| l.p_processing_w), total(pon, |l| l.p_processing_w)),
        tpc_saving_percent: saving(total(spine_leaf, |l| l.tpc_w), total(pon, |l| l.tpc_w)),
        per_level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 7] = [
    "topology",
    "demand_mips",
    "tier",
    "mips_served",
    "p_processing_w",
    "p_networking_w",
    "tpc_w",
];

/// One row of the CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub topology: String,
    pub demand_mips: f64,
    pub tier: String,
    pub mips_served: f64,
    pub p_processing_w: f64,
    pub p_networking_w: f64,
    pub tpc_w: f64,
}

pub fn emit(report: &SweepReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER)?;
            for level in &report.levels {
                for tier in Tier::ALL {
                    let mips = level.tier_mips.get(&tier).copied().unwrap_or(0.0);
                    w.write_record([
                        report.topology.as_str().to_string(),
                        format!("{:.6}", level.demand_mips),
                        tier.as_str().to_string(),
                        format!("{mips:.6}"),
                        format!("{:.6}", level.p_processing_w),
                        format!("{:.6}", level.p_networking_w),
                        format!("{:.6}", level.tpc_w),
                    ])?;
                }
            }
            let bytes = w.into_inner().map_err(|e| Error::Export(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Export(e.to_string()))
        }
    }
}

pub fn read_json(text: &str) -> Result<SweepReport> {
    Ok(serde_json::from_str(text)?)
}

pub fn read_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(demand: f64, pn: f64, pp: f64) -> LevelResult {
        LevelResult {
            demand_mips: demand,
            status: "optimal".into(),
            tier_mips: Tier::ALL.iter().map(|&t| (t, if t == Tier::RoomFog { 16.0 * demand } else { 0.0 })).collect(),
            p_processing_w: pp,
            p_networking_w: pn,
            tpc_w: pp + pn,
            nodes: 1,
            feasible: true,
            max_violation: 0.0,
            worst_certificate: 0.0,
            certificate_failures: 0,
            error: None,
        }
    }

    fn report(topology: Backhaul, levels: Vec<LevelResult>) -> SweepReport {
        SweepReport {
            topology,
            ddr: 0.6,
            seed: 0,
            overrides: Value::Object(Default::default()),
            levels,
        }
    }

    #[test]
    fn self_comparison_saves_nothing() {
        let r = report(Backhaul::Pon, vec![level(100.0, 300.0, 40.0), level(200.0, 310.0, 45.0)]);
        let s = compare(&r, &r).unwrap();
        assert_eq!(s.networking_saving_percent, 0.0);
        assert_eq!(s.processing_saving_percent, 0.0);
        assert_eq!(s.per_level.len(), 2);
    }

    #[test]
    fn savings_use_sweep_totals() {
        let pon = report(Backhaul::Pon, vec![level(100.0, 100.0, 10.0), level(200.0, 300.0, 30.0)]);
        let sl = report(Backhaul::SpineLeaf, vec![level(100.0, 200.0, 10.0), level(200.0, 600.0, 50.0)]);
        let s = compare(&pon, &sl).unwrap();
        // (800 - 400) / 800 and (60 - 40) / 60.
        assert!((s.networking_saving_percent - 50.0).abs() < 1e-12);
        assert!((s.processing_saving_percent - 100.0 / 3.0).abs() < 1e-12);
        assert!((s.per_level[1].networking_saving_percent - 50.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_levels_are_rejected() {
        let pon = report(Backhaul::Pon, vec![level(100.0, 1.0, 1.0)]);
        let sl = report(Backhaul::SpineLeaf, vec![level(200.0, 1.0, 1.0)]);
        assert!(matches!(compare(&pon, &sl), Err(Error::Comparison(_))));
    }

    #[test]
    fn empty_report_emits_header_only() {
        let csv = emit(&report(Backhaul::Pon, vec![]), Format::Csv).unwrap();
        assert_eq!(csv, CSV_HEADER.join(",") + "\n");
        assert!(read_csv(&csv).unwrap().is_empty());
    }

    #[test]
    fn one_level_emits_a_row_per_tier_and_round_trips() {
        let r = report(Backhaul::SpineLeaf, vec![level(100.0, 817.5, 22.25)]);
        let csv = emit(&r, Format::Csv).unwrap();
        let rows = read_csv(&csv).unwrap();
        assert_eq!(rows.len(), Tier::ALL.len());
        assert_eq!(rows[1].tier, "room_fog");
        assert_eq!(rows[1].mips_served, 1600.0);
        assert_eq!(csv, emit(&r, Format::Csv).unwrap());
        let json = emit(&r, Format::Json).unwrap();
        assert_eq!(read_json(&json).unwrap(), r);
    }

    #[test]
    fn levels_must_increase() {
        assert!(check_levels(&[]).is_err());
        assert!(check_levels(&[200.0, 100.0]).is_err());
        assert!(check_levels(&[-5.0]).is_err());
        assert!(check_levels(&default_levels()).is_ok());
    }
}
