//! Built-in exact optimizer: a sparse revised simplex for the relaxations
//! and best-first branch and bound over the binaries.

mod bnb;
mod lu;
mod simplex;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use bnb::{solve_model, solve_model_with_priority, MilpOptions, MilpStatus, ModelOutcome};
pub use simplex::{Basis, Certificate, LpResult, LpStatus, VarStatus};

use crate::error::{Error, Result};
use crate::milp::{LinearModel, MilpProblem, VarKind, VarMeta};
use crate::model::{total_power, Flow, Solution};

/// Flows below this are reported as zero.
const FLOW_EPSILON: f64 = 1e-9;

/// Solves the linear relaxation of `model` (binaries range over `[0, 1]`).
pub fn solve_lp(model: &LinearModel) -> Result<LpResult> {
    model.check_well_formed()?;
    let limit = 100 * (model.rows.len() + model.num_vars()) + 10_000;
    Ok(simplex::Engine::new(model).solve(None, limit))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpResult {
    pub status: MilpStatus,
    /// Incumbent, if any.
    pub solution: Option<Solution>,
    pub objective: f64,
    pub bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub worst_certificate: f64,
    pub certificate_failures: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log: Vec<String>,
}

impl MilpResult {
    /// Relative gap between incumbent and bound.
    pub fn gap(&self) -> f64 {
        (self.objective - self.bound).max(0.0) / self.objective.abs().max(1.0)
    }
}

/// Minimizes the problem's objective and maps the incumbent back to the
/// domain.
pub fn solve_milp(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpResult> {
    for v in &problem.model.variables {
        if v.kind == VarKind::Binary && v.upper.is_some_and(|u| u != 1.0) {
            return Err(Error::Solver(format!("{} is not a plain binary", v.name)));
        }
    }
    let priority: Vec<u8> = if options.activation_first {
        problem
            .meta
            .iter()
            .map(|m| u8::from(matches!(m, VarMeta::NodeActive { .. } | VarMeta::DeviceActive { .. })))
            .collect()
    } else {
        Vec::new()
    };
    let outcome = solve_model_with_priority(&problem.model, options, &priority)?;
    let solution = match &outcome.values {
        Some(values) => Some(extract_solution(problem, values)?),
        None => None,
    };
    Ok(MilpResult {
        status: outcome.status,
        solution,
        objective: outcome.objective,
        bound: outcome.bound,
        nodes: outcome.nodes,
        lp_iterations: outcome.lp_iterations,
        worst_certificate: outcome.worst_certificate,
        certificate_failures: outcome.certificate_failures,
        log: outcome.log,
    })
}

/// Rounds binaries, maps variables to assignments, flows and activations,
/// and evaluates the power of the result.
pub fn extract_solution(problem: &MilpProblem, values: &[f64]) -> Result<Solution> {
    let model = &problem.model;
    if values.len() != model.num_vars() {
        return Err(Error::Extraction(format!(
            "{} values for {} variables",
            values.len(),
            model.num_vars()
        )));
    }
    let mut assignment = BTreeMap::new();
    let mut flows = Vec::new();
    let mut active_nodes = BTreeSet::new();
    let mut active_devices = BTreeSet::new();
    for (j, meta) in problem.meta.iter().enumerate() {
        let v = values[j];
        let on = if model.variables[j].kind == VarKind::Binary {
            let r = v.round();
            if (v - r).abs() > 1e-6 || !(r == 0.0 || r == 1.0) {
                return Err(Error::Extraction(format!("{} = {v} is not integral", model.variables[j].name)));
            }
            r == 1.0
        } else {
            false
        };
        match *meta {
            VarMeta::Choice { task, node } if on => {
                if assignment.insert(task, node).is_some() {
                    return Err(Error::Extraction(format!("task {task} chooses more than one node")));
                }
            }
            VarMeta::Flow { task, link, wavelength } if v > FLOW_EPSILON => {
                flows.push(Flow {
                    task,
                    link,
                    wavelength,
                    mbps: v,
                });
            }
            VarMeta::NodeActive { node } if on => {
                active_nodes.insert(node);
            }
            VarMeta::DeviceActive { device } if on => {
                active_devices.insert(device);
            }
            _ => {}
        }
    }
    let tasks = problem.scenario().tasks.len();
    if assignment.len() != tasks {
        return Err(Error::Extraction(format!("{} of {tasks} tasks assigned", assignment.len())));
    }
    flows.sort_by_key(|a| (a.task, a.link, a.wavelength));
    let mut solution = Solution {
        assignment,
        flows,
        active_devices,
        active_nodes,
        power: Default::default(),
    };
    solution.power = total_power(&solution, problem.topology(), problem.scenario())?;
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{formulate, Sense};
    use crate::model::{DeviceKind, Link, NetworkDevice, PowerProfile, ProcessingNode, Tier, Wavelength};
    use crate::scenario::Scenario;
    use crate::topology::{Backhaul, Topology, User};

    #[test]
    fn hand_lps() {
        let mut m = LinearModel::new("a");
        let x = m.add_var("x", VarKind::Continuous, None, 1.0);
        let y = m.add_var("y", VarKind::Continuous, None, 1.0);
        m.add_row("c", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.0);
        let r = solve_lp(&m).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);

        let mut m = LinearModel::new("b");
        m.add_var("x", VarKind::Continuous, None, 0.0);
        let r = solve_lp(&m).unwrap();
        assert_eq!((r.status, r.objective), (LpStatus::Optimal, 0.0));

        let mut m = LinearModel::new("c");
        m.add_var("x", VarKind::Continuous, None, -1.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    /// AP with two fogs hanging off one switch; fog A idles at 13.5 W and
    /// fog B at 27 W.
    fn two_fog_topology() -> Topology {
        let mut t = Topology::empty(Backhaul::Custom);
        let w0 = [Wavelength::AGGREGATE];
        let ap0 = t.add_device(NetworkDevice::new("ap0", DeviceKind::Ap, 2500.0, PowerProfile::new(7.2, 6.48)));
        let ap1 = t.add_device(NetworkDevice::new("ap1", DeviceKind::Ap, 2500.0, PowerProfile::new(7.2, 6.48)));
        let sw = t.add_device(NetworkDevice::new("sw", DeviceKind::EthernetSwitch, 10000.0, PowerProfile::new(10.0, 9.0)));
        t.add_link(Link::new(ap0, sw, w0, 2500.0));
        t.add_link(Link::new(ap1, sw, w0, 2500.0));
        for (ap, name) in [(ap0, "u0"), (ap1, "u1")] {
            t.users.push(User {
                id: name.into(),
                room: None,
                ap,
                demanding: true,
            });
        }
        for (id, idle) in [("fog-a", 13.5), ("fog-b", 27.0)] {
            t.add_node(ProcessingNode {
                id: id.into(),
                tier: Tier::RoomFog,
                capacity: 5000.0,
                profile: PowerProfile::new(30.0, idle),
                attachment: sw,
                room: None,
                user: None,
            });
        }
        t
    }

    #[test]
    fn two_tasks_choose_the_cheaper_fog() {
        let t = two_fog_topology();
        let s = Scenario::uniform(&t, 500.0, 0.6).unwrap();
        let p = formulate(&t, &s).unwrap();
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        let sol = r.solution.unwrap();
        let a = t.node_index("fog-a").unwrap();
        assert_eq!(sol.assignment.values().copied().collect::<Vec<_>>(), vec![a, a]);

        // Brute force over the four assignments with the shared power model.
        let mut best = f64::INFINITY;
        for first in 0..2 {
            for second in 0..2 {
                let mut cand = sol.clone();
                cand.assignment = [(0, first), (1, second)].into();
                cand.active_nodes = [first, second].into();
                let tpc = total_power(&cand, &t, &s).unwrap().tpc;
                best = best.min(tpc);
            }
        }
        assert!((r.objective - best).abs() <= 1e-6 * best);
        assert!((sol.power.tpc - r.objective).abs() <= 1e-9 * best);
    }

    #[test]
    fn extraction_rejects_fractional_binaries() {
        let t = two_fog_topology();
        let s = Scenario::uniform(&t, 500.0, 0.6).unwrap();
        let p = formulate(&t, &s).unwrap();
        let mut values = vec![0.0; p.model.num_vars()];
        let x = p.var(VarMeta::Choice { task: 0, node: 0 }).unwrap();
        values[x] = 0.5;
        assert!(matches!(extract_solution(&p, &values), Err(Error::Extraction(_))));
    }

    #[test]
    fn extraction_of_empty_scenario() {
        let t = two_fog_topology();
        let s = Scenario { tasks: vec![], ddr: 0.6 };
        let p = formulate(&t, &s).unwrap();
        let sol = extract_solution(&p, &vec![0.0; p.model.num_vars()]).unwrap();
        assert!(sol.assignment.is_empty() && sol.flows.is_empty());
        assert_eq!(sol.power.tpc, 0.0);
    }

    #[test]
    fn extraction_maps_choice_to_assignment() {
        let t = two_fog_topology();
        let s = Scenario::uniform(&t, 500.0, 0.6).unwrap();
        let p = formulate(&t, &s).unwrap();
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        let sol = r.solution.unwrap();
        let values = p.values_from_solution(&sol).unwrap();
        let again = extract_solution(&p, &values).unwrap();
        assert_eq!(again.assignment, sol.assignment);
    }
}
