//! Device and processing-node parameters with their published defaults, and
//! JSON override merging.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::PowerProfile;

/// Networking device parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    pub max_power: f64,
    pub idle_power: f64,
    /// Mbps.
    pub capacity: f64,
}

impl DeviceParams {
    pub const fn new(max_power: f64, idle_power: f64, capacity: f64) -> Self {
        Self {
            max_power,
            idle_power,
            capacity,
        }
    }

    pub fn profile(&self) -> PowerProfile {
        PowerProfile::new(self.max_power, self.idle_power)
    }
}

/// Processing node parameters. Only the maximum power is published; idle
/// power is `idle_fraction × max_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingParams {
    /// MIPS.
    pub capacity: f64,
    pub max_power: f64,
    pub idle_fraction: f64,
}

impl ProcessingParams {
    pub const fn new(capacity: f64, max_power: f64, idle_fraction: f64) -> Self {
        Self {
            capacity,
            max_power,
            idle_fraction,
        }
    }

    pub fn profile(&self) -> PowerProfile {
        PowerProfile::with_idle_fraction(self.max_power, self.idle_fraction)
    }
}

/// Default idle/max ratio for processing nodes.
pub const DEFAULT_PROCESSING_IDLE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub mobile: ProcessingParams,
    pub room_fog: ProcessingParams,
    pub building_fog: ProcessingParams,
    pub campus_fog: ProcessingParams,
    pub metro_fog: ProcessingParams,
    pub cloud: ProcessingParams,

    pub access_point: DeviceParams,
    pub onu: DeviceParams,
    pub olt: DeviceParams,
    pub ethernet_switch: DeviceParams,
    pub aggregation_switch: DeviceParams,
    pub edge_router: DeviceParams,
    pub optical_switch: DeviceParams,
    pub core_router: DeviceParams,
    pub spine_leaf_switch: DeviceParams,
    pub router: DeviceParams,

    /// Traffic (Mbps) per unit of processing demand (MIPS).
    pub ddr: f64,
    pub rooms: usize,
    pub aps_per_room: usize,
    pub demanders_per_room: usize,
    pub leaf_switches: usize,
    pub spine_switches: usize,
    pub cloud_servers: usize,
    /// Per-wavelength capacity of passive fibre segments (Mbps).
    pub passive_wavelength_capacity: f64,
    /// Capacity of the AP access channel per user (Mbps).
    pub access_link_capacity: f64,
    /// `awgr_table[input][wavelength] = output`; `None` uses the cyclic plan.
    pub awgr_table: Option<Vec<Vec<Option<usize>>>>,
}

impl Default for Parameters {
    fn default() -> Self {
        default_parameters()
    }
}

/// Published device parameters for the four-room building.
pub fn default_parameters() -> Parameters {
    let f = DEFAULT_PROCESSING_IDLE_FRACTION;
    Parameters {
        mobile: ProcessingParams::new(1500.0, 6.6, f),
        room_fog: ProcessingParams::new(5000.0, 15.0, f),
        building_fog: ProcessingParams::new(14000.0, 95.0, f),
        campus_fog: ProcessingParams::new(35160.0, 95.0, f),
        metro_fog: ProcessingParams::new(73440.0, 95.0, f),
        cloud: ProcessingParams::new(320440.0, 120.0, f),

        access_point: DeviceParams::new(7.2, 6.48, 2500.0),
        onu: DeviceParams::new(15.0, 13.5, 10000.0),
        olt: DeviceParams::new(300.0, 270.0, 160000.0),
        ethernet_switch: DeviceParams::new(3800.0, 3420.0, 160000.0),
        aggregation_switch: DeviceParams::new(3800.0, 3420.0, 160000.0),
        edge_router: DeviceParams::new(4200.0, 3780.0, 200000.0),
        optical_switch: DeviceParams::new(63.2, 56.88, 100000.0),
        core_router: DeviceParams::new(13200.0, 11880.0, 1200000.0),
        spine_leaf_switch: DeviceParams::new(193.0, 173.7, 240000.0),
        router: DeviceParams::new(4200.0, 3780.0, 200000.0),

        ddr: 0.6,
        rooms: 4,
        aps_per_room: 8,
        demanders_per_room: 4,
        leaf_switches: 4,
        spine_switches: 2,
        cloud_servers: 1,
        passive_wavelength_capacity: 10000.0,
        access_link_capacity: 2500.0,
        awgr_table: None,
    }
}

impl Parameters {
    /// Sets the idle fraction of every processing tier.
    pub fn with_processing_idle_fraction(mut self, fraction: f64) -> Self {
        for p in self.processing_mut() {
            p.idle_fraction = fraction;
        }
        self
    }

    fn processing_mut(&mut self) -> [&mut ProcessingParams; 6] {
        [
            &mut self.mobile,
            &mut self.room_fog,
            &mut self.building_fog,
            &mut self.campus_fog,
            &mut self.metro_fog,
            &mut self.cloud,
        ]
    }

    fn processing(&self) -> [(&'static str, &ProcessingParams); 6] {
        [
            ("mobile", &self.mobile),
            ("room_fog", &self.room_fog),
            ("building_fog", &self.building_fog),
            ("campus_fog", &self.campus_fog),
            ("metro_fog", &self.metro_fog),
            ("cloud", &self.cloud),
        ]
    }

    fn devices(&self) -> [(&'static str, &DeviceParams); 10] {
        [
            ("access_point", &self.access_point),
            ("onu", &self.onu),
            ("olt", &self.olt),
            ("ethernet_switch", &self.ethernet_switch),
            ("aggregation_switch", &self.aggregation_switch),
            ("edge_router", &self.edge_router),
            ("optical_switch", &self.optical_switch),
            ("core_router", &self.core_router),
            ("spine_leaf_switch", &self.spine_leaf_switch),
            ("router", &self.router),
        ]
    }

    /// Multiplies every power figure by `factor`.
    pub fn scale_power(&mut self, factor: f64) {
        for p in self.processing_mut() {
            p.max_power *= factor;
        }
        for d in [
            &mut self.access_point,
            &mut self.onu,
            &mut self.olt,
            &mut self.ethernet_switch,
            &mut self.aggregation_switch,
            &mut self.edge_router,
            &mut self.optical_switch,
            &mut self.core_router,
            &mut self.spine_leaf_switch,
            &mut self.router,
        ] {
            d.max_power *= factor;
            d.idle_power *= factor;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, p) in self.processing() {
            if !(p.capacity > 0.0 && p.capacity.is_finite()) {
                return bad(format!("{name}.capacity must be positive"));
            }
            if !(p.max_power >= 0.0 && p.max_power.is_finite()) {
                return bad(format!("{name}.max_power must be non-negative"));
            }
            if !(0.0..=1.0).contains(&p.idle_fraction) {
                return bad(format!("{name}.idle_fraction must lie in [0, 1]"));
            }
        }
        for (name, d) in self.devices() {
            if !(d.capacity > 0.0 && d.capacity.is_finite()) {
                return bad(format!("{name}.capacity must be positive"));
            }
            if !d.profile().is_valid() {
                return bad(format!("{name} requires 0 <= idle_power <= max_power"));
            }
        }
        if !(self.ddr > 0.0 && self.ddr.is_finite()) {
            return bad("ddr must be positive".into());
        }
        if self.rooms == 0 || self.aps_per_room == 0 {
            return bad("rooms and aps_per_room must be positive".into());
        }
        if self.demanders_per_room > self.aps_per_room {
            return bad("demanders_per_room exceeds aps_per_room".into());
        }
        if self.leaf_switches == 0 || self.spine_switches == 0 || self.cloud_servers == 0 {
            return bad("leaf_switches, spine_switches and cloud_servers must be positive".into());
        }
        if !(self.passive_wavelength_capacity > 0.0 && self.access_link_capacity > 0.0) {
            return bad("link capacities must be positive".into());
        }
        Ok(())
    }

    /// Applies a partial JSON document on top of these parameters. Keys that
    /// do not exist in the parameter set are rejected.
    pub fn with_overrides(&self, overrides: &Value) -> Result<Parameters> {
        let mut base = serde_json::to_value(self)?;
        merge_known(&mut base, overrides, "parameters")?;
        let merged: Parameters = serde_json::from_value(base)
            .map_err(|e| Error::Config(format!("parameters: {e}")))?;
        merged.validate()?;
        Ok(merged)
    }
}

/// Deep-merges `patch` into `base`, refusing keys absent from `base`.
pub fn merge_known(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (key, value) in p {
                let here = format!("{path}.{key}");
                match b.get_mut(key) {
                    None => return Err(Error::Config(format!("unknown key `{here}`"))),
                    Some(slot) if slot.is_object() && value.is_object() => {
                        merge_known(slot, value, &here)?
                    }
                    Some(slot) => *slot = value.clone(),
                }
            }
            Ok(())
        }
        (_, Value::Null) => Ok(()),
        (_, _) => Err(Error::Config(format!("`{path}` must be an object"))),
    }
}
