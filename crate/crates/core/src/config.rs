//! Run configuration: a single JSON document holding the topology choice,
//! parameter overrides, demand levels, output paths and solver options.

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::milp::{Fault, FormulationOptions};
use crate::params::Parameters;
use crate::runner::{default_levels, SweepConfig};
use crate::solver::MilpOptions;
use crate::topology::Backhaul;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub gap: f64,
    pub integrality_tolerance: f64,
    pub node_limit: Option<usize>,
    pub time_limit_s: Option<f64>,
    pub activation_first: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = MilpOptions::default();
        Self {
            gap: d.gap,
            integrality_tolerance: d.integrality_tolerance,
            node_limit: d.node_limit,
            time_limit_s: None,
            activation_first: d.activation_first,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for solution, report and savings files.
    pub out_dir: Option<PathBuf>,
    pub export_mps: Option<PathBuf>,
    pub export_lp: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub topology: Backhaul,
    /// Partial parameter document merged over the defaults.
    pub parameters: Value,
    /// Uniform demand per demanding user for `solve` (MIPS).
    pub demand: f64,
    /// Sweep levels (MIPS).
    pub levels: Vec<f64>,
    /// Seed of the verification instances.
    pub seed: u64,
    /// Number of verification instances.
    pub instances: usize,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            topology: Backhaul::Pon,
            parameters: Value::Object(Default::default()),
            demand: 100.0,
            levels: default_levels(),
            seed: 0,
            instances: 100,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Accepts `spine-leaf` as well as `spine_leaf`.
pub fn parse_backhaul(s: &str) -> Result<Backhaul> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "pon" => Ok(Backhaul::Pon),
        "spine_leaf" => Ok(Backhaul::SpineLeaf),
        other => Err(Error::Config(format!("unknown topology {other:?}; expected pon or spine-leaf"))),
    }
}

/// Parses `100,200,300`.
pub fn parse_levels(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("demand level {part:?} is not a number")))
        })
        .collect()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        // The topology may be spelled with a hyphen.
        if let Some(Value::String(t)) = value.get("topology") {
            let b = parse_backhaul(t)?;
            value["topology"] = Value::String(b.as_str().into());
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    /// The defaults with every parameter spelled out.
    pub fn defaults_document() -> Result<String> {
        let mut config = RunConfig::default();
        config.parameters = serde_json::to_value(Parameters::default())?;
        Ok(serde_json::to_string_pretty(&config)? + "\n")
    }

    pub fn check(&self) -> Result<()> {
        if self.topology == Backhaul::Custom {
            return Err(Error::Config("topology must be pon or spine-leaf".into()));
        }
        if !(self.demand.is_finite() && self.demand > 0.0) {
            return Err(Error::Config(format!("demand {} must be positive", self.demand)));
        }
        if !(self.solver.gap >= 0.0 && self.solver.gap.is_finite()) {
            return Err(Error::Config("solver.gap must be non-negative".into()));
        }
        if !(self.solver.integrality_tolerance > 0.0 && self.solver.integrality_tolerance < 0.5) {
            return Err(Error::Config("solver.integrality_tolerance must lie in (0, 0.5)".into()));
        }
        if self.solver.time_limit_s.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
            return Err(Error::Config("solver.time_limit_s must be positive".into()));
        }
        if self.instances == 0 {
            return Err(Error::Config("instances must be positive".into()));
        }
        self.parameters()?;
        Ok(())
    }

    pub fn parameters(&self) -> Result<Parameters> {
        if !self.parameters.is_object() {
            return Err(Error::Config("parameters must be an object".into()));
        }
        Parameters::default().with_overrides(&self.parameters)
    }

    pub fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            gap: self.solver.gap,
            integrality_tolerance: self.solver.integrality_tolerance,
            node_limit: self.solver.node_limit,
            time_limit: self.solver.time_limit_s.map(Duration::from_secs_f64),
            activation_first: self.solver.activation_first,
            ..MilpOptions::default()
        }
    }

    pub fn formulation(&self, fault: bool) -> FormulationOptions {
        FormulationOptions {
            fault: fault.then_some(Fault::ZeroNodeIdle),
            ..FormulationOptions::default()
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            parameters: self.parameters()?,
            overrides: self.parameters.clone(),
            levels: self.levels.clone(),
            seed: self.seed,
            milp: self.milp_options(),
            formulation: self.formulation(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_dump_parses_back_to_default_parameters() {
        let text = RunConfig::defaults_document().unwrap();
        let config = RunConfig::from_json(&text).unwrap();
        assert_eq!(config.parameters().unwrap(), Parameters::default());
        assert_eq!(config.parameters["room_fog"]["capacity"], 5000.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"topolgy": "pon"}"#), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"parameters": {"room_fog": {"capacty": 1}}}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn hyphenated_topology_and_overrides() {
        let c = RunConfig::from_json(r#"{"topology": "spine-leaf", "parameters": {"ddr": 0.3}}"#).unwrap();
        assert_eq!(c.topology, Backhaul::SpineLeaf);
        assert_eq!(c.parameters().unwrap().ddr, 0.3);
    }

    #[test]
    fn bad_values_are_config_errors() {
        assert!(RunConfig::from_json(r#"{"demand": -5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"topology": "ring"}"#).is_err());
        assert!(parse_levels("100, x").is_err());
        assert_eq!(parse_levels("100, 200").unwrap(), vec![100.0, 200.0]);
    }
}
