//! Solver-neutral linear models, the energy-minimization formulation, an
//! independent feasibility audit, and MPS / LP text interchange.

mod check;
mod formulate;
mod lpfile;
mod mps;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use check::{check_feasible, Candidate, FeasibilityReport, FeasibilityViolation, FEASIBILITY_TOLERANCE};
pub use formulate::{formulate, formulate_with, Fault, FormulationOptions};
pub use lpfile::{export_lp, read_lp};
pub use mps::{export_mps, read_mps};

use crate::error::{Error, Result};
use crate::model::{Solution, Wavelength};
use crate::scenario::Scenario;
use crate::topology::Topology;

pub const MAX_NAME_LEN: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

/// A decision variable. The lower bound is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Variable {
    pub fn upper_bound(&self) -> f64 {
        match self.kind {
            VarKind::Binary => self.upper.unwrap_or(1.0).min(1.0),
            VarKind::Continuous => self.upper.unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violate the row (zero when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize objective · x` subject to `rows`, `0 <= x <= upper`, binaries
/// integral.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<f64>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, upper: Option<f64>, cost: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            kind,
            upper,
        });
        self.objective.push(cost);
        self.variables.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(j, _)| j)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest row or bound violation.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(values)).fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (-x).max(x - v.upper_bound()).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Rejects non-finite data and out-of-range references.
    pub fn check_well_formed(&self) -> Result<()> {
        if self.objective.len() != self.variables.len() {
            return Err(Error::Formulation("objective length differs from variable count".into()));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::Formulation(format!("objective coefficient of {} is not finite", self.variables[j].name)));
        }
        for v in &self.variables {
            if let Some(u) = v.upper {
                if u.is_nan() || u < 0.0 {
                    return Err(Error::Formulation(format!("bad upper bound on {}", v.name)));
                }
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(Error::Formulation(format!("row {} has a non-finite right-hand side", row.name)));
            }
            for &(j, a) in &row.terms {
                if j >= self.variables.len() || !a.is_finite() {
                    return Err(Error::Formulation(format!("row {} has a bad coefficient", row.name)));
                }
            }
        }
        Ok(())
    }
}

/// Constraint families of the formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Every task's processing demand is met.
    Demand,
    /// Node load within capacity, and only on active nodes.
    NodeCapacity,
    /// Per-link, per-wavelength capacity.
    LinkCapacity,
    /// Flow conservation and wavelength continuity at transit devices.
    Conservation,
    /// Injection at the demander's access point and absorption at the
    /// serving node's attachment.
    SourceSink,
    /// Each task on exactly one node.
    SingleAssignment,
    /// Device traffic within capacity, and only through active devices.
    Activation,
    /// Per-task activation linking (valid inequalities).
    Linking,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Demand => "demand",
            Family::NodeCapacity => "node_capacity",
            Family::LinkCapacity => "link_capacity",
            Family::Conservation => "conservation",
            Family::SourceSink => "source_sink",
            Family::SingleAssignment => "single_assignment",
            Family::Activation => "activation",
            Family::Linking => "linking",
        }
    }
}

/// What a variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarMeta {
    /// Binary: task served by node.
    Choice { task: usize, node: usize },
    /// MIPS of task processed on node.
    Allocation { task: usize, node: usize },
    /// Mbps of task on link and wavelength.
    Flow { task: usize, link: usize, wavelength: Wavelength },
    /// Binary: processing node active.
    NodeActive { node: usize },
    /// Binary: network device active.
    DeviceActive { device: usize },
}

/// The inputs a problem was formulated from.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub topology: Topology,
    pub scenario: Scenario,
}

/// A formulated instance: the linear model plus the mapping from variables
/// and rows back to the domain.
#[derive(Debug, Clone)]
pub struct MilpProblem {
    pub model: LinearModel,
    pub families: Vec<Family>,
    pub meta: Vec<VarMeta>,
    pub context: Arc<Context>,
    index: HashMap<VarMeta, usize>,
}

impl MilpProblem {
    pub(crate) fn new(model: LinearModel, families: Vec<Family>, meta: Vec<VarMeta>, context: Arc<Context>) -> Self {
        let index = meta.iter().enumerate().map(|(j, m)| (*m, j)).collect();
        Self {
            model,
            families,
            meta,
            context,
            index,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.context.topology
    }

    pub fn scenario(&self) -> &Scenario {
        &self.context.scenario
    }

    pub fn var(&self, meta: VarMeta) -> Option<usize> {
        self.index.get(&meta).copied()
    }

    pub fn rows_of(&self, family: Family) -> impl Iterator<Item = usize> + '_ {
        self.families
            .iter()
            .enumerate()
            .filter(move |(_, f)| **f == family)
            .map(|(i, _)| i)
    }

    /// Variable vector realizing a solution. Fails when the solution uses a
    /// decision the formulation does not contain.
    pub fn values_from_solution(&self, solution: &Solution) -> Result<Vec<f64>> {
        let mut values = vec![0.0; self.model.num_vars()];
        let missing = |what: String| Error::Extraction(format!("solution uses {what}, absent from the formulation"));
        for (&task, &node) in &solution.assignment {
            let d = self.scenario().tasks[task].processing_demand;
            let x = self.var(VarMeta::Choice { task, node }).ok_or_else(|| missing(format!("task {task} on node {node}")))?;
            let psi = self.var(VarMeta::Allocation { task, node }).ok_or_else(|| missing(format!("allocation {task}/{node}")))?;
            values[x] = 1.0;
            values[psi] = d;
        }
        for f in &solution.flows {
            let j = self
                .var(VarMeta::Flow { task: f.task, link: f.link, wavelength: f.wavelength })
                .ok_or_else(|| missing(format!("flow of task {} on link {} {}", f.task, f.link, f.wavelength)))?;
            values[j] = f.mbps;
        }
        for &node in &solution.active_nodes {
            if let Some(j) = self.var(VarMeta::NodeActive { node }) {
                values[j] = 1.0;
            }
        }
        for &device in &solution.active_devices {
            if let Some(j) = self.var(VarMeta::DeviceActive { device }) {
                values[j] = 1.0;
            }
        }
        Ok(values)
    }

    pub fn family_row_count(&self, family: Family) -> usize {
        self.rows_of(family).count()
    }
}
