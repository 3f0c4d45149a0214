use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::simplex::{Basis, Engine, LpResult, LpStatus};
use crate::error::{Error, Result};
use crate::milp::LinearModel;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    /// Relative optimality gap.
    pub gap: f64,
    pub integrality_tolerance: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Simplex iterations allowed per node LP.
    pub lp_iteration_limit: usize,
    /// Record one line per explored node.
    pub log: bool,
    /// Branch on activation binaries before assignment binaries when the
    /// problem marks them; otherwise every binary competes on fractionality.
    pub activation_first: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap: 1e-6,
            integrality_tolerance: 1e-6,
            node_limit: None,
            time_limit: None,
            lp_iteration_limit: 1_000_000,
            log: false,
            activation_first: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    GapLimit,
    NodeLimit,
}

impl MilpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::GapLimit => "gap_limit",
            MilpStatus::NodeLimit => "node_limit",
        }
    }
}

/// Outcome of branch and bound on a bare linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub status: MilpStatus,
    /// Incumbent values, if one was found.
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    /// Proven lower bound.
    pub bound: f64,
    /// Nodes whose relaxation was solved, the root included.
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Largest certificate measure over every optimal node LP.
    pub worst_certificate: f64,
    /// Optimal node LPs whose certificate failed.
    pub certificate_failures: usize,
    pub log: Vec<String>,
}

struct Node {
    bound: f64,
    seq: u64,
    depth: usize,
    /// `(variable, value)` fixings from the root.
    fixings: Vec<(usize, f64)>,
    basis: Option<Arc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so that the max-heap pops the lowest bound, then the oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn gap_tolerance(gap: f64, incumbent: f64) -> f64 {
    gap * incumbent.abs().max(1.0)
}

/// Best-first branch and bound over the binary variables of `model`.
pub fn solve_model(model: &LinearModel, options: &MilpOptions) -> Result<ModelOutcome> {
    solve_model_with_priority(model, options, &[])
}

/// As [`solve_model`], branching only among the fractional binaries of the
/// highest `priority` class (missing entries count as 0).
pub fn solve_model_with_priority(model: &LinearModel, options: &MilpOptions, priority: &[u8]) -> Result<ModelOutcome> {
    model.check_well_formed()?;
    let start = Instant::now();
    let binaries: Vec<usize> = model.binaries().collect();
    let class = |j: usize| priority.get(j).copied().unwrap_or(0);
    let mut engine = Engine::new(model);
    let root_bounds: Vec<(f64, f64)> = binaries.iter().map(|&j| engine.bounds(j)).collect();

    let mut out = ModelOutcome {
        status: MilpStatus::Infeasible,
        values: None,
        objective: f64::INFINITY,
        bound: f64::NEG_INFINITY,
        nodes: 0,
        lp_iterations: 0,
        worst_certificate: 0.0,
        certificate_failures: 0,
        log: Vec::new(),
    };
    let mut incumbent_basis: Option<Basis> = None;
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        depth: 0,
        fixings: Vec::new(),
        basis: None,
    });
    let mut stopped: Option<MilpStatus> = None;

    while let Some(node) = heap.pop() {
        if out.values.is_some() && node.bound >= out.objective - gap_tolerance(options.gap, out.objective) {
            heap.clear();
            break;
        }
        if options.node_limit.is_some_and(|l| out.nodes >= l) {
            stopped = Some(MilpStatus::NodeLimit);
            heap.push(node);
            break;
        }
        if options.time_limit.is_some_and(|l| start.elapsed() >= l) {
            stopped = Some(MilpStatus::GapLimit);
            heap.push(node);
            break;
        }

        for (k, &j) in binaries.iter().enumerate() {
            engine.set_bounds(j, root_bounds[k].0, root_bounds[k].1);
        }
        for &(j, v) in &node.fixings {
            engine.set_bounds(j, v, v);
        }
        let lp = engine.solve(node.basis.as_deref(), options.lp_iteration_limit);
        out.nodes += 1;
        out.lp_iterations += lp.iterations;
        match lp.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                if options.log {
                    out.log.push(format!("node {} depth {} infeasible", out.nodes - 1, node.depth));
                }
                continue;
            }
            LpStatus::Unbounded => {
                return Err(Error::Solver("the linear relaxation is unbounded".into()));
            }
            LpStatus::IterationLimit => {
                return Err(Error::Solver(lp.diagnostics.unwrap_or_else(|| "iteration limit".into())));
            }
        }
        record_certificate(&mut out, &lp);
        let bound = lp.objective.max(node.bound);
        let branch = most_fractional(&binaries, &lp.primal, options.integrality_tolerance, class);
        if options.log {
            let var = branch.map_or_else(|| "-".to_string(), |j| model.variables[j].name.clone());
            out.log.push(format!("node {} depth {} bound {:.9} branch {}", out.nodes - 1, node.depth, bound, var));
        }
        if out.values.is_some() && bound >= out.objective - gap_tolerance(options.gap, out.objective) {
            continue;
        }
        match branch {
            None => {
                out.objective = lp.objective;
                out.values = Some(lp.primal.clone());
                incumbent_basis = Some(lp.basis.clone());
            }
            Some(j) => {
                let basis = Arc::new(lp.basis);
                for v in [0.0, 1.0] {
                    seq += 1;
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Node {
                        bound,
                        seq,
                        depth: node.depth + 1,
                        fixings,
                        basis: Some(basis.clone()),
                    });
                }
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    out.bound = open_bound.min(out.objective);
    out.status = match (stopped, &out.values) {
        (Some(s), _) => s,
        (None, Some(_)) => MilpStatus::Optimal,
        (None, None) => MilpStatus::Infeasible,
    };
    if out.values.is_none() && stopped.is_some() {
        out.bound = open_bound;
    }

    // Polish: re-solve with the binaries fixed at their rounded values so the
    // continuous part is exact for the integral assignment.
    if let Some(mut values) = out.values.take() {
        for &j in &binaries {
            let v = values[j].round();
            engine.set_bounds(j, v, v);
        }
        let lp = engine.solve(incumbent_basis.as_ref(), options.lp_iteration_limit);
        out.lp_iterations += lp.iterations;
        if lp.status == LpStatus::Optimal {
            record_certificate(&mut out, &lp);
            values = lp.primal;
            for &j in &binaries {
                values[j] = values[j].round();
            }
            out.objective = model.objective_value(&values);
            if out.status == MilpStatus::Optimal {
                out.bound = out.bound.min(out.objective);
            }
        }
        out.values = Some(values);
    }
    Ok(out)
}

fn record_certificate(out: &mut ModelOutcome, lp: &LpResult) {
    if let Some(c) = lp.certificate {
        out.worst_certificate = out.worst_certificate.max(c.worst());
        if !c.holds() {
            out.certificate_failures += 1;
        }
    }
}

/// Binary farthest from integrality within the highest fractional priority
/// class; ties go to the lowest index.
fn most_fractional(binaries: &[usize], values: &[f64], tolerance: f64, class: impl Fn(usize) -> u8) -> Option<usize> {
    let mut best: Option<(usize, u8, f64)> = None;
    for &j in binaries {
        let v = values[j];
        let frac = (v - v.floor()).min(v.ceil() - v);
        if frac <= tolerance {
            continue;
        }
        let c = class(j);
        if best.is_none_or(|(_, bc, f)| c > bc || (c == bc && frac > f)) {
            best = Some((j, c, frac));
        }
    }
    best.map(|(j, _, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarKind};

    #[test]
    fn integral_relaxation_needs_only_the_root() {
        let mut m = LinearModel::new("t");
        let a = m.add_var("a", VarKind::Binary, None, 1.0);
        let b = m.add_var("b", VarKind::Binary, None, 2.0);
        m.add_row("one", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.0);
        let r = solve_model(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.nodes, 1);
        assert_eq!(r.values.unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn higher_class_is_branched_first() {
        let values = [0.5, 0.9, 0.3, 0.45];
        let plain = most_fractional(&[0, 1, 2, 3], &values, 1e-6, |_| 0);
        assert_eq!(plain, Some(0));
        let ranked = most_fractional(&[0, 1, 2, 3], &values, 1e-6, |j| u8::from(j >= 2));
        assert_eq!(ranked, Some(3));
        // An integral high-class variable does not shadow the rest.
        let ranked = most_fractional(&[0, 1, 2], &[0.5, 0.9, 1.0], 1e-6, |j| u8::from(j == 2));
        assert_eq!(ranked, Some(0));
    }

    #[test]
    fn knapsack_branches() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5 (as a minimization)
        let mut m = LinearModel::new("k");
        let a = m.add_var("a", VarKind::Binary, None, -5.0);
        let b = m.add_var("b", VarKind::Binary, None, -4.0);
        let c = m.add_var("c", VarKind::Binary, None, -3.0);
        m.add_row("w", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 5.0);
        m.add_row("x", vec![(a, 4.0), (b, 1.0), (c, 3.0)], Sense::Le, 6.0);
        let opts = MilpOptions {
            log: true,
            ..Default::default()
        };
        let r = solve_model(&m, &opts).unwrap();
        // Brute force over the 8 points.
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let x: Vec<f64> = (0..3).map(|i| ((mask >> i) & 1) as f64).collect();
            if m.max_violation(&x) <= 1e-9 {
                best = best.min(m.objective_value(&x));
            }
        }
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!((r.objective - best).abs() < 1e-9);
        assert!(r.bound <= r.objective + 1e-9);
        assert_eq!(r.log.len(), r.nodes);
    }

    #[test]
    fn infeasible_root() {
        let mut m = LinearModel::new("i");
        let a = m.add_var("a", VarKind::Binary, None, 1.0);
        m.add_row("r", vec![(a, 1.0)], Sense::Ge, 2.0);
        let r = solve_model(&m, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
        assert!(r.values.is_none());
    }

    #[test]
    fn node_limit_keeps_incumbent_status() {
        let mut m = LinearModel::new("k");
        let vars: Vec<usize> = (0..6).map(|i| m.add_var(format!("v{i}"), VarKind::Binary, None, -(i as f64 + 1.0))).collect();
        m.add_row("w", vars.iter().map(|&v| (v, 2.0 + v as f64 * 0.7)).collect(), Sense::Le, 7.3);
        let opts = MilpOptions {
            node_limit: Some(1),
            ..Default::default()
        };
        let r = solve_model(&m, &opts).unwrap();
        assert_eq!(r.status, MilpStatus::NodeLimit);
        assert_eq!(r.nodes, 1);
    }
}
