use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Task;
use crate::topology::Topology;

/// The demand set to be served.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tasks: Vec<Task>,
    pub ddr: f64,
}

impl Scenario {
    /// One task of `mips` per demanding user.
    pub fn uniform(topology: &Topology, mips: f64, ddr: f64) -> Result<Self> {
        let loads: Vec<f64> = topology.demanders().map(|_| mips).collect();
        Self::with_loads(topology, &loads, ddr)
    }

    /// One task per demanding user, loads given in demander order.
    pub fn with_loads(topology: &Topology, loads: &[f64], ddr: f64) -> Result<Self> {
        let demanders: Vec<usize> = topology.demanders().collect();
        if demanders.len() != loads.len() {
            return Err(Error::Config(format!(
                "{} loads for {} demanding users",
                loads.len(),
                demanders.len()
            )));
        }
        let scenario = Scenario {
            tasks: demanders
                .iter()
                .zip(loads)
                .map(|(&user, &mips)| Task::new(user, 0, mips, ddr))
                .collect(),
            ddr,
        };
        scenario.validate(topology)?;
        Ok(scenario)
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if !(self.ddr > 0.0 && self.ddr.is_finite()) {
            return Err(Error::Config(format!("ddr must be positive, got {}", self.ddr)));
        }
        let mut seen = vec![false; topology.users.len()];
        for task in &self.tasks {
            let user = topology.users.get(task.source).ok_or_else(|| {
                Error::Formulation(format!("task source {} is not a user", task.source))
            })?;
            if !user.demanding {
                return Err(Error::Formulation(format!("{} does not generate demands", user.id)));
            }
            if std::mem::replace(&mut seen[task.source], true) {
                return Err(Error::Formulation(format!("{} has more than one task", user.id)));
            }
            if !(task.processing_demand > 0.0 && task.processing_demand.is_finite()) {
                return Err(Error::Config(format!(
                    "processing demand must be positive, got {}",
                    task.processing_demand
                )));
            }
            if task.traffic_demand != self.ddr * task.processing_demand {
                return Err(Error::Config("traffic demand must equal ddr × processing demand".into()));
            }
        }
        Ok(())
    }

    pub fn total_mips(&self) -> f64 {
        self.tasks.iter().map(|t| t.processing_demand).sum()
    }
}
