//! Domain types shared by the topology builders, the formulation, the oracle
//! and the reporting code, plus the linear power-profile evaluator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::topology::Topology;

/// Utilization above `1 + OVERLOAD_TOLERANCE` is treated as an overload.
pub const OVERLOAD_TOLERANCE: f64 = 1e-6;

/// Linear power profile: `idle_power` once active, rising linearly to
/// `max_power` at full utilization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub max_power: f64,
    pub idle_power: f64,
}

impl PowerProfile {
    pub const PASSIVE: PowerProfile = PowerProfile {
        max_power: 0.0,
        idle_power: 0.0,
    };

    pub fn new(max_power: f64, idle_power: f64) -> Self {
        Self {
            max_power,
            idle_power,
        }
    }

    /// Profile whose idle power is `fraction × max_power`.
    pub fn with_idle_fraction(max_power: f64, fraction: f64) -> Self {
        Self::new(max_power, max_power * fraction)
    }

    /// Watts per unit of load for a device of the given capacity.
    pub fn slope(&self, capacity: f64) -> f64 {
        (self.max_power - self.idle_power) / capacity
    }

    pub fn is_valid(&self) -> bool {
        self.idle_power.is_finite()
            && self.max_power.is_finite()
            && 0.0 <= self.idle_power
            && self.idle_power <= self.max_power
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.max_power * factor, self.idle_power * factor)
    }
}

/// Power drawn by a device with a linear profile.
///
/// Inactive devices draw nothing; active ones draw
/// `idle + (max - idle) * utilization`.
pub fn power_draw(profile: &PowerProfile, active: bool, utilization: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&utilization) {
        return Err(Error::Domain(format!(
            "utilization {utilization} outside [0, 1]"
        )));
    }
    if !active {
        return Ok(0.0);
    }
    Ok(profile.idle_power + (profile.max_power - profile.idle_power) * utilization)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Ap,
    Onu,
    Splitter,
    Coupler,
    Awgr,
    Olt,
    EthernetSwitch,
    AggregationSwitch,
    EdgeRouter,
    OpticalSwitch,
    CoreRouter,
    LeafSwitch,
    SpineSwitch,
    Router,
}

impl DeviceKind {
    pub fn is_passive(self) -> bool {
        matches!(self, DeviceKind::Splitter | DeviceKind::Coupler | DeviceKind::Awgr)
    }

    /// Electronic switching equipment terminates the optical signal and may
    /// re-emit traffic on any channel.
    pub fn is_converting(self) -> bool {
        !self.is_passive() && !matches!(self, DeviceKind::Ap | DeviceKind::Onu)
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum serializes");
        write!(f, "{}", s.as_str().unwrap_or("?"))
    }
}

/// A network device in the backhaul graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDevice {
    pub id: String,
    pub kind: DeviceKind,
    /// Mbps.
    pub capacity: f64,
    pub profile: PowerProfile,
    pub wavelength_converting: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<usize>,
}

impl NetworkDevice {
    pub fn new(id: impl Into<String>, kind: DeviceKind, capacity: f64, profile: PowerProfile) -> Self {
        Self {
            id: id.into(),
            kind,
            capacity,
            profile,
            wavelength_converting: kind.is_converting(),
            room: None,
        }
    }

    pub fn in_room(mut self, room: usize) -> Self {
        self.room = Some(room);
        self
    }

    pub fn is_passive(&self) -> bool {
        self.kind.is_passive()
    }

    /// Devices that draw power carry an activation decision.
    pub fn is_powered(&self) -> bool {
        !self.is_passive() && self.profile.max_power > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Mobile,
    RoomFog,
    BuildingFog,
    CampusFog,
    MetroFog,
    Cloud,
}

impl Tier {
    pub const ALL: [Tier; 6] = [
        Tier::Mobile,
        Tier::RoomFog,
        Tier::BuildingFog,
        Tier::CampusFog,
        Tier::MetroFog,
        Tier::Cloud,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Mobile => "mobile",
            Tier::RoomFog => "room_fog",
            Tier::BuildingFog => "building_fog",
            Tier::CampusFog => "campus_fog",
            Tier::MetroFog => "metro_fog",
            Tier::Cloud => "cloud",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A compute location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingNode {
    pub id: String,
    pub tier: Tier,
    /// MIPS.
    pub capacity: f64,
    pub profile: PowerProfile,
    /// Index of the network device the node hangs off.
    pub attachment: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<usize>,
    /// Owning user for mobile nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<usize>,
}

/// Optical channel index. Electronic segments use the single index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Wavelength(pub u8);

impl Wavelength {
    pub const AGGREGATE: Wavelength = Wavelength(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Wavelength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// Directed link with a capacity per carried wavelength (Mbps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    /// Output port on `from` (only meaningful for AWGRs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_port: Option<usize>,
    /// Input port on `to` (only meaningful for AWGRs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_port: Option<usize>,
    pub capacity: BTreeMap<Wavelength, f64>,
}

impl Link {
    pub fn new(from: usize, to: usize, wavelengths: impl IntoIterator<Item = Wavelength>, capacity: f64) -> Self {
        Self {
            from,
            to,
            from_port: None,
            to_port: None,
            capacity: wavelengths.into_iter().map(|w| (w, capacity)).collect(),
        }
    }

    pub fn with_ports(mut self, from_port: Option<usize>, to_port: Option<usize>) -> Self {
        self.from_port = from_port;
        self.to_port = to_port;
        self
    }

    pub fn wavelengths(&self) -> impl Iterator<Item = Wavelength> + '_ {
        self.capacity.keys().copied()
    }

    pub fn carries(&self, w: Wavelength) -> bool {
        self.capacity.contains_key(&w)
    }
}

/// A processing request from one demanding user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    /// Index of the demanding user.
    pub source: usize,
    /// Task index within the user's task set.
    pub index: usize,
    /// MIPS.
    pub processing_demand: f64,
    /// Mbps; always `ddr × processing_demand`.
    pub traffic_demand: f64,
}

impl Task {
    pub fn new(source: usize, index: usize, processing_demand: f64, ddr: f64) -> Self {
        Self {
            source,
            index,
            processing_demand,
            traffic_demand: ddr * processing_demand,
        }
    }
}

/// Traffic of one task on one link and wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub task: usize,
    pub link: usize,
    pub wavelength: Wavelength,
    pub mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Solution {
    /// Task index → processing node index.
    pub assignment: BTreeMap<usize, usize>,
    /// Sorted by (task, link, wavelength).
    pub flows: Vec<Flow>,
    pub active_devices: BTreeSet<usize>,
    pub active_nodes: BTreeSet<usize>,
    #[serde(default)]
    pub power: PowerReport,
}

impl Solution {
    /// Processing load (MIPS) per node.
    pub fn node_loads(&self, scenario: &Scenario, node_count: usize) -> Vec<f64> {
        let mut loads = vec![0.0; node_count];
        for (&task, &node) in &self.assignment {
            loads[node] += scenario.tasks[task].processing_demand;
        }
        loads
    }

    /// Traffic (Mbps) handled by each device: everything entering it plus
    /// what its attached demanders inject.
    pub fn device_throughput(&self, topology: &Topology, scenario: &Scenario) -> Vec<f64> {
        let mut through = vec![0.0; topology.devices.len()];
        for flow in &self.flows {
            through[topology.links[flow.link].to] += flow.mbps;
        }
        for task in &scenario.tasks {
            through[topology.users[task.source].ap] += task.traffic_demand;
        }
        through
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPower {
    pub id: String,
    pub active: bool,
    pub utilization: f64,
    pub power: f64,
}

/// Total power consumption split into processing and networking parts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerReport {
    pub processing_power: f64,
    pub networking_power: f64,
    pub tpc: f64,
    #[serde(default)]
    pub nodes: Vec<ComponentPower>,
    #[serde(default)]
    pub devices: Vec<ComponentPower>,
}

fn utilization(load: f64, capacity: f64, what: &str) -> Result<f64> {
    if load <= 0.0 {
        return Ok(0.0);
    }
    let u = load / capacity;
    if u > 1.0 + OVERLOAD_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "{what} overloaded: {load} of {capacity}"
        )));
    }
    Ok(u.min(1.0))
}

/// Evaluates the power of a solution device by device.
///
/// Only components listed as active contribute; a loaded component that is
/// not active, or any component loaded beyond capacity, is an error.
pub fn total_power(solution: &Solution, topology: &Topology, scenario: &Scenario) -> Result<PowerReport> {
    let loads = solution.node_loads(scenario, topology.processing_nodes.len());
    let through = solution.device_throughput(topology, scenario);
    let mut report = PowerReport::default();

    for (i, node) in topology.processing_nodes.iter().enumerate() {
        let active = solution.active_nodes.contains(&i);
        let u = utilization(loads[i], node.capacity, &node.id)?;
        if !active && u > 0.0 {
            return Err(Error::Infeasible(format!("{} carries load while inactive", node.id)));
        }
        let p = power_draw(&node.profile, active, u)?;
        report.processing_power += p;
        if active {
            report.nodes.push(ComponentPower {
                id: node.id.clone(),
                active,
                utilization: u,
                power: p,
            });
        }
    }

    for (i, device) in topology.devices.iter().enumerate() {
        let u = utilization(through[i], device.capacity, &device.id)?;
        if device.is_passive() {
            continue;
        }
        let active = solution.active_devices.contains(&i);
        if !active && u > 0.0 {
            return Err(Error::Infeasible(format!("{} carries traffic while inactive", device.id)));
        }
        let p = power_draw(&device.profile, active, u)?;
        report.networking_power += p;
        if active {
            report.devices.push(ComponentPower {
                id: device.id.clone(),
                active,
                utilization: u,
                power: p,
            });
        }
    }
    report.tpc = report.processing_power + report.networking_power;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn access_point_profile_endpoints() {
        let ap = PowerProfile::new(7.2, 6.48);
        assert_eq!(power_draw(&ap, true, 1.0).unwrap(), 7.2);
        assert_eq!(power_draw(&ap, true, 0.0).unwrap(), 6.48);
        assert_eq!(power_draw(&ap, false, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn onu_half_load() {
        let onu = PowerProfile::new(15.0, 13.5);
        assert!((power_draw(&onu, true, 0.5).unwrap() - 14.25).abs() < 1e-12);
    }

    #[test]
    fn utilization_out_of_range_is_domain_error() {
        let p = PowerProfile::new(1.0, 0.5);
        assert!(matches!(power_draw(&p, true, 1.2), Err(Error::Domain(_))));
        assert!(matches!(power_draw(&p, true, -0.1), Err(Error::Domain(_))));
        assert!(matches!(power_draw(&p, true, f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn converting_classification() {
        assert!(!DeviceKind::Awgr.is_converting());
        assert!(!DeviceKind::Onu.is_converting());
        assert!(!DeviceKind::Ap.is_converting());
        assert!(DeviceKind::Olt.is_converting());
        assert!(DeviceKind::LeafSwitch.is_converting());
        assert_eq!(DeviceKind::EthernetSwitch.to_string(), "ethernet_switch");
    }
}
