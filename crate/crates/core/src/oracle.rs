//! Brute-force reference solver for small tree-shaped instances.
//!
//! Every assignment tuple is enumerated; on a tree each task has exactly one
//! route to each node, so routing needs no optimization and the minimum over
//! tuples is the true optimum. Nothing here touches the simplex code.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{check_feasible, formulate_with, Candidate, FormulationOptions};
use crate::model::{
    total_power, DeviceKind, Flow, Link, NetworkDevice, PowerProfile, ProcessingNode, Solution, Tier, Wavelength,
};
use crate::scenario::Scenario;
use crate::solver::{solve_milp, MilpOptions, MilpStatus};
use crate::topology::{validate, Arc, Backhaul, Topology, User};

pub const MAX_TASKS: usize = 4;
pub const MAX_NODES: usize = 6;
/// Relative objective agreement required between oracle and solver.
pub const AGREEMENT: f64 = 1e-6;

/// A generated instance small enough to enumerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub seed: u64,
    pub index: usize,
    pub topology: Topology,
    pub scenario: Scenario,
}

impl OracleInstance {
    /// Checks the size limits and that every task has at most one route to
    /// every node.
    pub fn check(&self) -> Result<()> {
        if self.scenario.tasks.len() > MAX_TASKS {
            return Err(Error::Domain(format!("{} tasks exceed {MAX_TASKS}", self.scenario.tasks.len())));
        }
        if self.topology.processing_nodes.len() > MAX_NODES {
            return Err(Error::Domain(format!(
                "{} processing nodes exceed {MAX_NODES}",
                self.topology.processing_nodes.len()
            )));
        }
        if let Some(v) = validate(&self.topology).first() {
            return Err(Error::Domain(format!("{}: {}", v.subject, v.message)));
        }
        for task in &self.scenario.tasks {
            let source = self.topology.users[task.source].ap;
            for node in &self.topology.processing_nodes {
                if device_routes(&self.topology, source, node.attachment).len() > 1 {
                    return Err(Error::Domain(format!("more than one route to {}", node.id)));
                }
            }
        }
        Ok(())
    }
}

/// Builds instance `index` of the family seeded by `seed`.
///
/// The fabric is a random tree of switches (some passive) with access points
/// as leaves, links in both directions on the aggregate channel, fog nodes on
/// switches and mobile nodes on access points.
pub fn random_instance(seed: u64, index: usize) -> OracleInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let w = [Wavelength::AGGREGATE];
    let mut t = Topology::empty(Backhaul::Custom);

    let switches = rng.gen_range(1..=3);
    let mut fabric = Vec::new();
    for i in 0..switches {
        let passive = i > 0 && rng.gen_bool(0.25);
        let capacity = rng.gen_range(2..=20) as f64 * 500.0;
        let device = if passive {
            NetworkDevice::new(format!("sp{i}"), DeviceKind::Splitter, capacity, PowerProfile::new(0.0, 0.0))
        } else {
            let kind = [DeviceKind::EthernetSwitch, DeviceKind::AggregationSwitch, DeviceKind::EdgeRouter]
                [rng.gen_range(0..3)];
            NetworkDevice::new(format!("sw{i}"), kind, capacity, random_profile(&mut rng, 5.0, 60.0))
        };
        let d = t.add_device(device);
        if i > 0 {
            let parent = fabric[rng.gen_range(0..i)];
            connect(&mut t, &mut rng, d, parent, &w);
        }
        fabric.push(d);
    }

    let tasks = rng.gen_range(1..=MAX_TASKS);
    let bystanders = rng.gen_range(0..=2);
    let mut nodes_left = MAX_NODES;
    for u in 0..tasks + bystanders {
        let demanding = u < tasks;
        let capacity = rng.gen_range(2..=6) as f64 * 500.0;
        let ap = t.add_device(NetworkDevice::new(
            format!("ap{u}"),
            DeviceKind::Ap,
            capacity,
            random_profile(&mut rng, 2.0, 10.0),
        ));
        let parent = fabric[rng.gen_range(0..fabric.len())];
        connect(&mut t, &mut rng, ap, parent, &w);
        let user = t.users.len();
        t.users.push(User {
            id: format!("u{u}"),
            room: None,
            ap,
            demanding,
        });
        // Demanders may own a phone too; it is never a candidate.
        if nodes_left > 1 && rng.gen_bool(if demanding { 0.2 } else { 0.8 }) {
            nodes_left -= 1;
            t.add_node(ProcessingNode {
                id: format!("mobile{u}"),
                tier: Tier::Mobile,
                capacity: rng.gen_range(1..=4) as f64 * 500.0,
                profile: random_profile(&mut rng, 3.0, 10.0),
                attachment: ap,
                room: None,
                user: Some(user),
            });
        }
    }

    let fogs = rng.gen_range(1..=nodes_left);
    for f in 0..fogs {
        let tier = [Tier::RoomFog, Tier::BuildingFog, Tier::CampusFog][rng.gen_range(0..3)];
        t.add_node(ProcessingNode {
            id: format!("fog{f}"),
            tier,
            capacity: rng.gen_range(1..=12) as f64 * 500.0,
            profile: random_profile(&mut rng, 10.0, 100.0),
            attachment: fabric[rng.gen_range(0..fabric.len())],
            room: None,
            user: None,
        });
    }

    let ddr = [0.3, 0.6, 1.0][rng.gen_range(0..3)];
    let loads: Vec<f64> = (0..tasks).map(|_| rng.gen_range(1..=20) as f64 * 100.0).collect();
    let scenario = Scenario::with_loads(&t, &loads, ddr).expect("generated loads are valid");
    OracleInstance {
        seed,
        index,
        topology: t,
        scenario,
    }
}

fn random_profile(rng: &mut ChaCha8Rng, low: f64, high: f64) -> PowerProfile {
    let max = (rng.gen_range(low..high) * 100.0).round() / 100.0;
    let idle = (max * rng.gen_range(0.0..0.95) * 100.0).round() / 100.0;
    PowerProfile::new(max, idle)
}

fn connect(t: &mut Topology, rng: &mut ChaCha8Rng, a: usize, b: usize, w: &[Wavelength]) {
    for (from, to) in [(a, b), (b, a)] {
        let capacity = rng.gen_range(2..=20) as f64 * 500.0;
        t.add_link(Link::new(from, to, w.iter().copied(), capacity));
    }
}

/// Every wavelength-continuous route from `from` to `to` that visits no
/// device twice and never relays through an access point, as arc lists.
fn device_routes(t: &Topology, from: usize, to: usize) -> Vec<Vec<Arc>> {
    let mut found = Vec::new();
    if from == to {
        found.push(Vec::new());
        return found;
    }
    let adj = t.adjacency();
    let mut first = Vec::new();
    t.source_arcs(&adj, from, &mut first);
    let mut visited = vec![false; t.devices.len()];
    visited[from] = true;
    let mut path = Vec::new();
    for arc in first {
        extend(t, &adj, arc, to, &mut visited, &mut path, &mut found);
    }
    // Distinct device sequences only; wavelength variants count once.
    let mut by_devices: BTreeMap<Vec<usize>, Vec<Arc>> = BTreeMap::new();
    for route in found {
        let key: Vec<usize> = route.iter().map(|a| a.link).collect();
        let e = by_devices.entry(key).or_insert_with(|| route.clone());
        if wavelength_key(&route) < wavelength_key(e) {
            *e = route;
        }
    }
    by_devices.into_values().collect()
}

fn wavelength_key(route: &[Arc]) -> Vec<u8> {
    route.iter().map(|a| a.wavelength.0).collect()
}

fn extend(
    t: &Topology,
    adj: &crate::topology::Adjacency,
    arc: Arc,
    to: usize,
    visited: &mut Vec<bool>,
    path: &mut Vec<Arc>,
    found: &mut Vec<Vec<Arc>>,
) {
    let head = t.links[arc.link].to;
    if visited[head] {
        return;
    }
    path.push(arc);
    if head == to {
        found.push(path.clone());
    } else if t.devices[head].kind != DeviceKind::Ap {
        visited[head] = true;
        let mut next = Vec::new();
        t.next_arcs(adj, arc, &mut next);
        for a in next {
            extend(t, adj, a, to, visited, path, found);
        }
        visited[head] = false;
    }
    path.pop();
}

/// Exhaustive search over assignment tuples.
///
/// Each task follows its unique route to the chosen node on the cheapest
/// wavelength, lowest index first. Tuples that overload a node, link or
/// device are rejected; the cheapest remaining one wins, ties going to the
/// lexicographically smallest tuple.
pub fn brute_force(topology: &Topology, scenario: &Scenario) -> Result<Solution> {
    scenario.validate(topology)?;
    let nodes = topology.processing_nodes.len();
    let tasks = scenario.tasks.len();
    if tasks == 0 {
        return Ok(Solution::default());
    }
    if nodes == 0 {
        return Err(Error::Infeasible("no processing nodes".into()));
    }
    // routes[k][d]: the route task k takes to node d, if d may serve k.
    let routes: Vec<Vec<Option<Vec<Arc>>>> = scenario
        .tasks
        .iter()
        .map(|task| {
            let source = topology.users[task.source].ap;
            topology
                .processing_nodes
                .iter()
                .map(|n| {
                    let eligible = n.user.is_none_or(|u| !topology.users[u].demanding);
                    if !eligible {
                        return None;
                    }
                    device_routes(topology, source, n.attachment).into_iter().next()
                })
                .collect()
        })
        .collect();

    let count = nodes.checked_pow(tasks as u32).ok_or_else(|| Error::Domain("instance too large".into()))?;
    let evaluated: Vec<(f64, usize, Solution)> = (0..count)
        .into_par_iter()
        .filter_map(|code| {
            let tuple = decode(code, nodes, tasks);
            evaluate(topology, scenario, &routes, &tuple).map(|s| (s.power.tpc, code, s))
        })
        .collect();
    let best = evaluated.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    evaluated
        .into_iter()
        .filter(|e| e.0 <= best + 1e-12 * best.abs())
        .min_by_key(|e| e.1)
        .map(|e| e.2)
        .ok_or_else(|| Error::Infeasible("no assignment tuple respects every capacity".into()))
}

/// Tuple number `code` in lexicographic order, first task most significant.
fn decode(mut code: usize, nodes: usize, tasks: usize) -> Vec<usize> {
    let mut tuple = vec![0; tasks];
    for slot in tuple.iter_mut().rev() {
        *slot = code % nodes;
        code /= nodes;
    }
    tuple
}

fn evaluate(t: &Topology, s: &Scenario, routes: &[Vec<Option<Vec<Arc>>>], tuple: &[usize]) -> Option<Solution> {
    let mut solution = Solution::default();
    let mut on_arc: BTreeMap<Arc, f64> = BTreeMap::new();
    for (k, &d) in tuple.iter().enumerate() {
        let route = routes[k][d].as_ref()?;
        solution.assignment.insert(k, d);
        solution.active_nodes.insert(d);
        for &arc in route {
            *on_arc.entry(arc).or_default() += s.tasks[k].traffic_demand;
            solution.flows.push(Flow {
                task: k,
                link: arc.link,
                wavelength: arc.wavelength,
                mbps: s.tasks[k].traffic_demand,
            });
        }
    }
    let within = |load: f64, cap: f64| load <= cap * (1.0 + 1e-12);
    for (arc, load) in &on_arc {
        if !within(*load, t.links[arc.link].capacity[&arc.wavelength]) {
            return None;
        }
    }
    let loads = solution.node_loads(s, t.processing_nodes.len());
    if loads.iter().zip(&t.processing_nodes).any(|(&l, n)| !within(l, n.capacity)) {
        return None;
    }
    let through = solution.device_throughput(t, s);
    for (i, device) in t.devices.iter().enumerate() {
        if !within(through[i], device.capacity) {
            return None;
        }
        if through[i] > 0.0 && device.is_powered() {
            solution.active_devices.insert(i);
        }
    }
    solution.flows.sort_by_key(|a| (a.task, a.link, a.wavelength));
    solution.power = total_power(&solution, t, s).ok()?;
    Some(solution)
}

/// Result of one oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub index: usize,
    /// Oracle optimum, `None` when infeasible.
    pub oracle: Option<f64>,
    /// Solver objective, `None` when infeasible.
    pub solver: Option<f64>,
    /// Why the instance failed, if it did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<InstanceCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failure.is_none())
    }

    pub fn first_failure(&self) -> Option<&InstanceCheck> {
        self.checks.iter().find(|c| c.failure.is_some())
    }
}

/// Solves one instance both ways and compares.
pub fn check_instance(instance: &OracleInstance, formulation: FormulationOptions, options: &MilpOptions) -> InstanceCheck {
    let mut check = InstanceCheck {
        index: instance.index,
        oracle: None,
        solver: None,
        failure: None,
    };
    if let Err(e) = instance.check() {
        check.failure = Some(format!("bad instance: {e}"));
        return check;
    }
    let (t, s) = (&instance.topology, &instance.scenario);
    let oracle = match brute_force(t, s) {
        Ok(sol) => Some(sol),
        Err(Error::Infeasible(_)) => None,
        Err(e) => {
            check.failure = Some(format!("oracle: {e}"));
            return check;
        }
    };
    check.oracle = oracle.as_ref().map(|o| o.power.tpc);

    let outcome = formulate_with(t, s, formulation).and_then(|p| solve_milp(&p, options).map(|r| (p, r)));
    let (problem, result) = match outcome {
        Ok(v) => v,
        // Unreachable tasks are rejected while formulating.
        Err(Error::Infeasible(m)) => {
            if oracle.is_some() {
                check.failure = Some(format!("solver rejected a feasible instance: {m}"));
            }
            return check;
        }
        Err(e) => {
            check.failure = Some(format!("solver: {e}"));
            return check;
        }
    };
    let failure = match (result.status, &result.solution, &oracle) {
        (MilpStatus::Infeasible, _, None) => None,
        (MilpStatus::Infeasible, _, Some(o)) => Some(format!("solver infeasible, oracle found {}", o.power.tpc)),
        (MilpStatus::Optimal, Some(sol), oracle) => {
            check.solver = Some(result.objective);
            let audit = check_feasible(&problem, &Candidate::from_solution(sol, s));
            match oracle {
                None => Some(format!("solver found {}, oracle says infeasible", result.objective)),
                Some(_) if !audit.feasible => Some(format!("solver solution infeasible by {:e}", audit.max_violation)),
                Some(o) => {
                    let reference = o.power.tpc;
                    let audit_oracle = check_feasible(&problem, &Candidate::from_solution(o, s));
                    if (result.objective - reference).abs() > AGREEMENT * reference.abs().max(1e-12) {
                        Some(format!("objective {} differs from oracle {}", result.objective, reference))
                    } else if (sol.power.tpc - result.objective).abs() > AGREEMENT * reference.abs().max(1e-12) {
                        Some(format!("solution power {} differs from objective {}", sol.power.tpc, result.objective))
                    } else if !audit_oracle.feasible {
                        Some(format!("oracle solution fails the audit by {:e}", audit_oracle.max_violation))
                    } else {
                        None
                    }
                }
            }
        }
        (status, _, _) => Some(format!("solver stopped with status {}", status.as_str())),
    };
    check.failure = failure;
    check
}

/// Runs `count` seeded instances through both solvers.
pub fn verify_instances(seed: u64, count: usize, formulation: FormulationOptions, options: &MilpOptions) -> VerifyReport {
    let checks = (0..count)
        .into_par_iter()
        .map(|i| check_instance(&random_instance(seed, i), formulation, options))
        .collect();
    VerifyReport { seed, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(fogs: &[(f64, f64)]) -> Topology {
        let w = [Wavelength::AGGREGATE];
        let mut t = Topology::empty(Backhaul::Custom);
        let ap = t.add_device(NetworkDevice::new("ap", DeviceKind::Ap, 2500.0, PowerProfile::new(7.2, 6.48)));
        let sw = t.add_device(NetworkDevice::new("sw", DeviceKind::EthernetSwitch, 10000.0, PowerProfile::new(10.0, 9.0)));
        t.add_link(Link::new(ap, sw, w, 2500.0));
        t.users.push(User {
            id: "u".into(),
            room: None,
            ap,
            demanding: true,
        });
        for (i, &(capacity, idle)) in fogs.iter().enumerate() {
            t.add_node(ProcessingNode {
                id: format!("fog{i}"),
                tier: Tier::RoomFog,
                capacity,
                profile: PowerProfile::new(30.0, idle),
                attachment: sw,
                room: None,
                user: None,
            });
        }
        t
    }

    #[test]
    fn single_reachable_fog_is_forced() {
        let t = chain(&[(5000.0, 3.75)]);
        let s = Scenario::uniform(&t, 100.0, 0.6).unwrap();
        let sol = brute_force(&t, &s).unwrap();
        assert_eq!(sol.assignment[&0], 0);
    }

    #[test]
    fn oversized_task_is_infeasible() {
        let t = chain(&[(5000.0, 3.75)]);
        let s = Scenario::uniform(&t, 6000.0, 0.1).unwrap();
        assert!(matches!(brute_force(&t, &s), Err(Error::Infeasible(_))));
    }

    #[test]
    fn generated_instances_are_well_formed_and_deterministic() {
        for i in 0..40 {
            let a = random_instance(11, i);
            a.check().unwrap();
            assert_eq!(a, random_instance(11, i));
        }
        assert_ne!(random_instance(11, 0), random_instance(12, 0));
    }

    #[test]
    fn solver_agrees_on_seeded_instances() {
        let report = verify_instances(7, 100, FormulationOptions::default(), &MilpOptions::default());
        let infeasible = report.checks.iter().filter(|c| c.oracle.is_none()).count();
        assert!(report.passed(), "{:?}", report.first_failure());
        assert!(infeasible < 50, "{infeasible} infeasible instances");
    }

    #[test]
    fn decode_is_lexicographic() {
        assert_eq!(decode(0, 3, 2), vec![0, 0]);
        assert_eq!(decode(1, 3, 2), vec![0, 1]);
        assert_eq!(decode(3, 3, 2), vec![1, 0]);
    }
}
