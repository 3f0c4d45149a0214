use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MilpProblem;
use crate::model::{DeviceKind, Flow, Solution, Wavelength};
use crate::scenario::Scenario;
use crate::topology::{awgr_output, Topology};

pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// A proposed operating point. Unlike [`Solution`] it may split a task over
/// several nodes, so that broken candidates can be described and audited.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// `(task, node, mips)`.
    pub allocations: Vec<(usize, usize, f64)>,
    pub flows: Vec<Flow>,
    pub active_devices: BTreeSet<usize>,
    pub active_nodes: BTreeSet<usize>,
}

impl Candidate {
    pub fn from_solution(solution: &Solution, scenario: &Scenario) -> Self {
        Self {
            allocations: solution
                .assignment
                .iter()
                .map(|(&t, &n)| (t, n, scenario.tasks[t].processing_demand))
                .collect(),
            flows: solution.flows.clone(),
            active_devices: solution.active_devices.clone(),
            active_nodes: solution.active_nodes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityViolation {
    pub family: String,
    pub subject: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub max_violation: f64,
    /// Largest violation of each family that has one.
    pub per_family: BTreeMap<String, f64>,
    /// Largest violations first.
    pub violations: Vec<FeasibilityViolation>,
}

struct Audit {
    found: Vec<FeasibilityViolation>,
}

impl Audit {
    fn note(&mut self, family: &str, subject: impl Into<String>, amount: f64) {
        if amount > FEASIBILITY_TOLERANCE || amount.is_nan() {
            self.found.push(FeasibilityViolation {
                family: family.to_string(),
                subject: subject.into(),
                amount: if amount.is_nan() { f64::INFINITY } else { amount },
            });
        }
    }
}

/// Audits a candidate against the domain constraints directly on the
/// topology, and against the rows of the formulated model.
pub fn check_feasible(problem: &MilpProblem, candidate: &Candidate) -> FeasibilityReport {
    let t = problem.topology();
    let s = problem.scenario();
    let mut audit = Audit { found: Vec::new() };

    domain_checks(t, s, candidate, &mut audit);

    // The same point expressed in model variables.
    let mut values = vec![0.0; problem.model.num_vars()];
    let mut expressible = true;
    let mut main: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for &(task, node, mips) in &candidate.allocations {
        let e = main.entry(task).or_insert((node, mips));
        if mips > e.1 {
            *e = (node, mips);
        }
        match problem.var(super::VarMeta::Allocation { task, node }) {
            Some(j) => values[j] += mips,
            None => expressible = false,
        }
    }
    for (&task, &(node, _)) in &main {
        if let Some(j) = problem.var(super::VarMeta::Choice { task, node }) {
            values[j] = 1.0;
        }
    }
    for f in &candidate.flows {
        match problem.var(super::VarMeta::Flow { task: f.task, link: f.link, wavelength: f.wavelength }) {
            Some(j) => values[j] += f.mbps,
            None => expressible = expressible && f.mbps.abs() <= FEASIBILITY_TOLERANCE,
        }
    }
    for &node in &candidate.active_nodes {
        if let Some(j) = problem.var(super::VarMeta::NodeActive { node }) {
            values[j] = 1.0;
        }
    }
    for &device in &candidate.active_devices {
        if let Some(j) = problem.var(super::VarMeta::DeviceActive { device }) {
            values[j] = 1.0;
        }
    }
    if expressible {
        for (i, row) in problem.model.rows.iter().enumerate() {
            // Tightening rows may cut off feasible but dominated points.
            if problem.families[i] == super::Family::Linking {
                continue;
            }
            let scale = 1.0 + row.rhs.abs();
            let family = problem.families[i].as_str();
            audit.note(&format!("model_rows/{family}"), row.name.clone(), row.violation(&values) / scale);
        }
    } else {
        audit.note("eligibility", "candidate", f64::INFINITY);
    }

    let mut violations = audit.found;
    violations.sort_by(|a, b| b.amount.total_cmp(&a.amount).then_with(|| a.subject.cmp(&b.subject)));
    let max_violation = violations.first().map_or(0.0, |v| v.amount);
    let mut per_family: BTreeMap<String, f64> = BTreeMap::new();
    for v in &violations {
        let e = per_family.entry(v.family.clone()).or_insert(0.0);
        *e = e.max(v.amount);
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        max_violation,
        per_family,
        violations,
    }
}

fn domain_checks(t: &Topology, s: &Scenario, c: &Candidate, audit: &mut Audit) {
    let ddr = s.ddr;
    let ntasks = s.tasks.len();
    let mut served = vec![0.0; ntasks];
    let mut per_task_nodes: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); ntasks];
    let mut node_load = vec![0.0; t.processing_nodes.len()];

    for &(task, node, mips) in &c.allocations {
        if task >= ntasks || node >= t.processing_nodes.len() {
            audit.note("eligibility", format!("allocation {task}/{node}"), f64::INFINITY);
            continue;
        }
        audit.note("nonnegativity", format!("task {task} on {}", t.processing_nodes[node].id), -mips);
        served[task] += mips;
        *per_task_nodes[task].entry(node).or_default() += mips;
        node_load[node] += mips;
        if let Some(u) = t.processing_nodes[node].user {
            if t.users[u].demanding && mips > 0.0 {
                audit.note("eligibility", format!("task {task} on {}", t.processing_nodes[node].id), mips);
            }
        }
    }
    for (k, task) in s.tasks.iter().enumerate() {
        audit.note("demand", format!("task {k}"), (served[k] - task.processing_demand).abs());
        let total: f64 = per_task_nodes[k].values().filter(|v| **v > 0.0).sum();
        let largest = per_task_nodes[k].values().copied().fold(0.0, f64::max);
        audit.note("single_assignment", format!("task {k}"), total - largest);
    }
    for (i, node) in t.processing_nodes.iter().enumerate() {
        audit.note("node_capacity", node.id.clone(), node_load[i] - node.capacity);
        if node_load[i] > FEASIBILITY_TOLERANCE && !c.active_nodes.contains(&i) {
            audit.note("activation", format!("{} inactive", node.id), node_load[i]);
        }
    }

    // Links.
    let mut on_arc: BTreeMap<(usize, Wavelength), f64> = BTreeMap::new();
    let mut per_task: Vec<BTreeMap<(usize, Wavelength), f64>> = vec![BTreeMap::new(); ntasks];
    for f in &c.flows {
        if f.link >= t.links.len() || f.task >= ntasks {
            audit.note("eligibility", format!("flow on link {}", f.link), f.mbps.abs().max(f64::MIN_POSITIVE));
            continue;
        }
        audit.note("nonnegativity", format!("flow t{} l{} {}", f.task, f.link, f.wavelength), -f.mbps);
        *on_arc.entry((f.link, f.wavelength)).or_default() += f.mbps;
        *per_task[f.task].entry((f.link, f.wavelength)).or_default() += f.mbps;
    }
    for (&(l, w), &mbps) in &on_arc {
        let link = &t.links[l];
        let subject = format!("{}->{} {w}", t.devices[link.from].id, t.devices[link.to].id);
        match link.capacity.get(&w) {
            Some(&cap) => audit.note("link_capacity", subject, mbps - cap),
            None => audit.note("link_capacity", subject, mbps.abs()),
        }
    }

    // Conservation per task.
    for (k, task) in s.tasks.iter().enumerate() {
        let source = t.users[task.source].ap;
        let mut net = vec![0.0; t.devices.len()];
        let mut out_w: BTreeMap<(usize, Wavelength), f64> = BTreeMap::new();
        let mut in_w: BTreeMap<(usize, Wavelength), f64> = BTreeMap::new();
        let mut awgr_out: BTreeMap<(usize, usize, Wavelength), f64> = BTreeMap::new();
        let mut awgr_in: BTreeMap<(usize, usize, Wavelength), f64> = BTreeMap::new();
        for (&(l, w), &mbps) in &per_task[k] {
            let link = &t.links[l];
            net[link.from] += mbps;
            net[link.to] -= mbps;
            *out_w.entry((link.from, w)).or_default() += mbps;
            *in_w.entry((link.to, w)).or_default() += mbps;
            if t.devices[link.from].kind == DeviceKind::Awgr {
                let port = link.from_port.unwrap_or(usize::MAX);
                *awgr_out.entry((link.from, port, w)).or_default() += mbps;
            }
            if t.devices[link.to].kind == DeviceKind::Awgr {
                let q = t
                    .awgr_table(link.to)
                    .zip(link.to_port)
                    .and_then(|(table, p)| awgr_output(table, p, w))
                    .unwrap_or(usize::MAX);
                *awgr_in.entry((link.to, q, w)).or_default() += mbps;
            }
        }
        let mut absorbed = vec![0.0; t.devices.len()];
        for (&node, &mips) in &per_task_nodes[k] {
            absorbed[t.processing_nodes[node].attachment] += ddr * mips;
        }
        for (n, device) in t.devices.iter().enumerate() {
            let injected = if n == source { task.traffic_demand } else { 0.0 };
            let residual = net[n] + absorbed[n] - injected;
            audit.note("conservation", format!("task {k} at {}", device.id), residual.abs());
            if device.wavelength_converting || device.kind == DeviceKind::Awgr {
                continue;
            }
            let endpoint = n == source || absorbed[n] > 0.0;
            let wavelengths: BTreeSet<Wavelength> = out_w
                .keys()
                .chain(in_w.keys())
                .filter(|(d, _)| *d == n)
                .map(|(_, w)| *w)
                .collect();
            for w in wavelengths {
                let o = out_w.get(&(n, w)).copied().unwrap_or(0.0);
                let i = in_w.get(&(n, w)).copied().unwrap_or(0.0);
                let miss = if endpoint { 0.0 } else { (o - i).abs() };
                let relay = if n == source || !endpoint { 0.0 } else { o - i };
                audit.note("conservation", format!("task {k} at {} {w}", device.id), miss.max(relay));
            }
        }
        let keys: BTreeSet<(usize, usize, Wavelength)> = awgr_out.keys().chain(awgr_in.keys()).copied().collect();
        for key in keys {
            let o = awgr_out.get(&key).copied().unwrap_or(0.0);
            let i = awgr_in.get(&key).copied().unwrap_or(0.0);
            let subject = format!("task {k} at {} port {} {}", t.devices[key.0].id, key.1, key.2);
            audit.note("conservation", subject, (o - i).abs());
        }
    }

    // Device activation and capacity.
    let mut through = vec![0.0; t.devices.len()];
    for (&(l, _), &mbps) in &on_arc {
        through[t.links[l].to] += mbps;
    }
    for task in &s.tasks {
        through[t.users[task.source].ap] += task.traffic_demand;
    }
    for (n, device) in t.devices.iter().enumerate() {
        audit.note("activation", format!("{} overload", device.id), through[n] - device.capacity);
        if device.is_powered() && through[n] > FEASIBILITY_TOLERANCE && !c.active_devices.contains(&n) {
            audit.note("activation", format!("{} inactive", device.id), through[n]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::formulate;
    use crate::params::default_parameters;
    use crate::topology::build_spine_leaf;

    #[test]
    fn overloaded_fog_reports_excess() {
        let t = build_spine_leaf(&default_parameters()).unwrap();
        let s = Scenario::uniform(&t, 100.0, 0.6).unwrap();
        let problem = formulate(&t, &s).unwrap();
        let fog = t.node_index("room-fog-r0").unwrap();
        let c = Candidate {
            allocations: vec![(0, fog, 6000.0)],
            active_nodes: [fog].into(),
            ..Default::default()
        };
        let report = check_feasible(&problem, &c);
        assert!(!report.feasible);
        let v = report.violations.iter().find(|v| v.family == "node_capacity").unwrap();
        assert!((v.amount - 1000.0).abs() < 1e-9);
    }
}
