//! `fogopt`: solve, sweep and verify the fog placement model.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fogopt::config::{parse_backhaul, parse_levels, RunConfig};
use fogopt::milp::{check_feasible, export_lp, export_mps, Candidate};
use fogopt::oracle::{random_instance, verify_instances};
use fogopt::runner::{compare, emit, run_sweep, solve_uniform, Format, SweepReport};
use fogopt::solver::MilpStatus;
use fogopt::topology::Backhaul;
use fogopt::Error;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;
const EXIT_VERIFY: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "fogopt", version, about = "Energy-minimizing fog placement over PON and spine-and-leaf backhauls")]
struct Cli {
    /// Print the full default configuration document and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one uniform demand level and write solution.json.
    Solve(Common),
    /// Solve every demand level and write CSV reports.
    Sweep(Common),
    /// Compare the solver against brute force on random small instances.
    Verify(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON configuration document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// pon or spine-leaf.
    #[arg(long)]
    topology: Option<String>,
    /// Demand per demanding user in MIPS.
    #[arg(long, allow_hyphen_values = true)]
    demand: Option<f64>,
    /// Comma-separated demand levels in MIPS.
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    /// Traffic per unit of processing demand (Mbps per MIPS).
    #[arg(long, allow_hyphen_values = true)]
    ddr: Option<f64>,
    /// Relative optimality gap.
    #[arg(long, allow_hyphen_values = true)]
    gap: Option<f64>,
    #[arg(long)]
    export_mps: Option<PathBuf>,
    #[arg(long)]
    export_lp: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Sweep both topologies and write the savings summary.
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of verification instances.
    #[arg(long)]
    instances: Option<usize>,
    /// Also write the sweep report as JSON.
    #[arg(long)]
    json: bool,
    /// Corrupts the formulation on purpose; the verifier must notice.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

/// A failure with its exit code.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Domain(_) | Error::Json(_) => EXIT_CONFIG,
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_IO,
        };
        Failure(code, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = if cli.print_defaults {
        RunConfig::defaults_document().map(|d| print!("{d}")).map_err(Failure::from)
    } else {
        match cli.command {
            Some(Command::Solve(c)) => load(&c).and_then(|cfg| solve(&c, &cfg)),
            Some(Command::Sweep(c)) => load(&c).and_then(|cfg| sweep(&c, &cfg)),
            Some(Command::Verify(c)) => load(&c).and_then(|cfg| verify(&c, &cfg)),
            None => Err(Failure(EXIT_CONFIG, "a command is required (solve, sweep or verify)".into())),
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("fogopt: {message}");
            ExitCode::from(code)
        }
    }
}

/// Reads the configuration file, then applies command-line overrides.
fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(t) = &c.topology {
        cfg.topology = parse_backhaul(t)?;
    }
    if let Some(d) = c.demand {
        cfg.demand = d;
    }
    if let Some(l) = &c.levels {
        cfg.levels = parse_levels(l)?;
    }
    if let Some(ddr) = c.ddr {
        let params = cfg.parameters.as_object_mut().ok_or_else(|| Failure(EXIT_CONFIG, "parameters must be an object".into()))?;
        params.insert("ddr".into(), ddr.into());
    }
    if let Some(g) = c.gap {
        cfg.solver.gap = g;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.instances {
        cfg.instances = n;
    }
    if c.out_dir.is_some() {
        cfg.output.out_dir = c.out_dir.clone();
    }
    if c.export_mps.is_some() {
        cfg.output.export_mps = c.export_mps.clone();
    }
    if c.export_lp.is_some() {
        cfg.output.export_lp = c.export_lp.clone();
    }
    cfg.check()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure(EXIT_IO, format!("{}: {e}", path.display())))
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")).join(name)
}

fn solve(c: &Common, cfg: &RunConfig) -> Result<(), Failure> {
    let mut sweep = cfg.sweep_config()?;
    sweep.formulation = cfg.formulation(c.inject_fault);
    let (report, problem) = solve_uniform(cfg.topology, cfg.demand, &sweep)?;
    if let Some(path) = &cfg.output.export_mps {
        write(path, &export_mps(&problem.model)?)?;
    }
    if let Some(path) = &cfg.output.export_lp {
        write(path, &export_lp(&problem.model)?)?;
    }
    write(&out_path(cfg, "solution.json"), &report.to_json()?)?;
    match (report.status, report.objective) {
        (MilpStatus::Infeasible, _) | (_, None) => Err(Failure(
            if report.status == MilpStatus::Infeasible { EXIT_INFEASIBLE } else { EXIT_LIMIT },
            format!("no feasible placement found ({})", report.status.as_str()),
        )),
        (status, Some(objective)) => {
            println!("tpc_w {objective:.6}");
            if status == MilpStatus::Optimal {
                Ok(())
            } else {
                Err(Failure(EXIT_LIMIT, format!("stopped with status {} (gap bound {:.6})", status.as_str(), report.bound)))
            }
        }
    }
}

fn summarize(report: &SweepReport) {
    for level in &report.levels {
        println!(
            "{} {:>7.1} {:<10} p_n {:>10.4} p_p {:>9.4} tpc {:>10.4}",
            report.topology.as_str(),
            level.demand_mips,
            level.status,
            level.p_networking_w,
            level.p_processing_w,
            level.tpc_w
        );
    }
}

/// Exit code for a finished sweep: every level optimal, or the worst case.
fn sweep_status(reports: &[&SweepReport]) -> Result<(), Failure> {
    let levels = reports.iter().flat_map(|r| r.levels.iter());
    let mut code = 0;
    for l in levels {
        let c = match l.status.as_str() {
            "optimal" => 0,
            "infeasible" => EXIT_INFEASIBLE,
            "error" => EXIT_IO,
            _ => EXIT_LIMIT,
        };
        code = code.max(c);
    }
    if code == 0 {
        Ok(())
    } else {
        Err(Failure(code, "not every level solved to optimality".into()))
    }
}

fn sweep(c: &Common, cfg: &RunConfig) -> Result<(), Failure> {
    let config = cfg.sweep_config()?;
    let topologies = if c.compare { vec![Backhaul::Pon, Backhaul::SpineLeaf] } else { vec![cfg.topology] };
    let mut reports = Vec::new();
    for t in topologies {
        let report = run_sweep(t, &config)?;
        summarize(&report);
        write(&out_path(cfg, &format!("{}.csv", t.as_str())), &emit(&report, Format::Csv)?)?;
        if c.json {
            write(&out_path(cfg, &format!("{}.json", t.as_str())), &emit(&report, Format::Json)?)?;
        }
        reports.push(report);
    }
    if c.compare {
        let savings = compare(&reports[0], &reports[1]).map_err(|e| Failure(EXIT_INFEASIBLE, e.to_string()))?;
        println!(
            "savings networking {:.2}% processing {:.2}% total {:.2}%",
            savings.networking_saving_percent, savings.processing_saving_percent, savings.tpc_saving_percent
        );
        let text = serde_json::to_string_pretty(&savings).map_err(Error::from)? + "\n";
        write(&out_path(cfg, "savings.json"), &text)?;
    }
    sweep_status(&reports.iter().collect::<Vec<_>>())
}

fn verify(c: &Common, cfg: &RunConfig) -> Result<(), Failure> {
    let formulation = cfg.formulation(c.inject_fault);
    let options = cfg.milp_options();
    let report = verify_instances(cfg.seed, cfg.instances, formulation, &options);
    let agreed = report.checks.iter().filter(|x| x.failure.is_none()).count();
    println!("oracle: {agreed}/{} instances agree (seed {})", report.checks.len(), cfg.seed);
    if let Some(bad) = report.first_failure() {
        let instance = random_instance(cfg.seed, bad.index);
        let dump = serde_json::json!({ "check": bad, "instance": instance });
        eprintln!("{}", serde_json::to_string_pretty(&dump).map_err(Error::from)?);
        return Err(Failure(EXIT_VERIFY, format!("instance {} failed: {}", bad.index, bad.failure.as_deref().unwrap_or(""))));
    }

    let mut sweep = cfg.sweep_config()?;
    sweep.formulation = formulation;
    let (solved, problem) = solve_uniform(cfg.topology, cfg.demand, &sweep)?;
    let Some(solution) = &solved.solution else {
        return Err(Failure(EXIT_VERIFY, format!("default solve ended {}", solved.status.as_str())));
    };
    let audit = check_feasible(&problem, &Candidate::from_solution(solution, problem.scenario()));
    println!(
        "feasibility: {} {} at {} MIPS, max violation {:e}",
        if audit.feasible { "pass" } else { "fail" },
        cfg.topology.as_str(),
        cfg.demand,
        audit.max_violation
    );
    if !audit.feasible {
        return Err(Failure(EXIT_VERIFY, "default solution fails the feasibility audit".into()));
    }
    Ok(())
}
