//! Backhaul topologies: the PON with AWGR wavelength routing and the
//! spine-and-leaf fabric, both sharing the upper chain to the cloud.

mod awgr;
mod pon;
mod spine_leaf;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use awgr::{awgr_output, AwgrRoutingTable};
pub use pon::build_pon;
pub use spine_leaf::build_spine_leaf;

use crate::model::{DeviceKind, Link, NetworkDevice, ProcessingNode, Tier, Wavelength};

/// Number of wavelengths on the PON access segment.
pub const PON_WAVELENGTHS: usize = 5;
/// Wavelength reserved for each room's uplink to the OLT.
pub const UPLINK_WAVELENGTH: Wavelength = Wavelength(4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backhaul {
    Pon,
    SpineLeaf,
    Custom,
}

impl Backhaul {
    pub fn as_str(self) -> &'static str {
        match self {
            Backhaul::Pon => "pon",
            Backhaul::SpineLeaf => "spine_leaf",
            Backhaul::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<usize>,
    /// Access point serving the user.
    pub ap: usize,
    pub demanding: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub aps: Vec<usize>,
    /// ONUs of the room's access points, in AP order.
    #[serde(default)]
    pub onus: Vec<usize>,
    pub users: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub splitter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupler: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwgrPlacement {
    pub device: usize,
    pub table: AwgrRoutingTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub backhaul: Backhaul,
    pub devices: Vec<NetworkDevice>,
    pub links: Vec<Link>,
    pub processing_nodes: Vec<ProcessingNode>,
    pub users: Vec<User>,
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub awgrs: Vec<AwgrPlacement>,
}

/// One link on one wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arc {
    pub link: usize,
    pub wavelength: Wavelength,
}

/// Incoming and outgoing link lists per device.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub out: Vec<Vec<usize>>,
    pub inc: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub rule: String,
    pub message: String,
}

impl Violation {
    fn new(subject: impl Into<String>, rule: &str, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            rule: rule.to_string(),
            message: message.into(),
        }
    }
}

impl Topology {
    pub fn empty(backhaul: Backhaul) -> Self {
        Self {
            backhaul,
            devices: Vec::new(),
            links: Vec::new(),
            processing_nodes: Vec::new(),
            users: Vec::new(),
            rooms: Vec::new(),
            awgrs: Vec::new(),
        }
    }

    pub fn add_device(&mut self, device: NetworkDevice) -> usize {
        self.devices.push(device);
        self.devices.len() - 1
    }

    pub fn add_link(&mut self, link: Link) -> usize {
        self.links.push(link);
        self.links.len() - 1
    }

    pub fn add_node(&mut self, node: ProcessingNode) -> usize {
        self.processing_nodes.push(node);
        self.processing_nodes.len() - 1
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.id == id)
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.processing_nodes.iter().position(|n| n.id == id)
    }

    pub fn demanders(&self) -> impl Iterator<Item = usize> + '_ {
        self.users
            .iter()
            .enumerate()
            .filter(|(_, u)| u.demanding)
            .map(|(i, _)| i)
    }

    pub fn nodes_of_tier(&self, tier: Tier) -> impl Iterator<Item = usize> + '_ {
        self.processing_nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.tier == tier)
            .map(|(i, _)| i)
    }

    pub fn awgr_table(&self, device: usize) -> Option<&AwgrRoutingTable> {
        self.awgrs.iter().find(|a| a.device == device).map(|a| &a.table)
    }

    pub fn adjacency(&self) -> Adjacency {
        let mut out = vec![Vec::new(); self.devices.len()];
        let mut inc = vec![Vec::new(); self.devices.len()];
        for (i, link) in self.links.iter().enumerate() {
            if link.from < out.len() && link.to < inc.len() {
                out[link.from].push(i);
                inc[link.to].push(i);
            }
        }
        Adjacency { out, inc }
    }

    /// Arcs leaving a device where traffic is injected: every wavelength of
    /// every outgoing link.
    pub fn source_arcs(&self, adj: &Adjacency, device: usize, out: &mut Vec<Arc>) {
        for &l in &adj.out[device] {
            out.extend(self.links[l].wavelengths().map(|w| Arc { link: l, wavelength: w }));
        }
    }

    /// Arcs that may continue traffic arriving on `arc` at its head device.
    ///
    /// Converting devices may re-emit on any wavelength. AWGRs forward each
    /// wavelength to the output port given by their routing table. Every
    /// other device keeps the arriving wavelength.
    pub fn next_arcs(&self, adj: &Adjacency, arc: Arc, out: &mut Vec<Arc>) {
        let link = &self.links[arc.link];
        let head = link.to;
        let device = &self.devices[head];
        if device.wavelength_converting {
            self.source_arcs(adj, head, out);
            return;
        }
        if device.kind == DeviceKind::Awgr {
            let Some(table) = self.awgr_table(head) else { return };
            let Some(port) = link.to_port.and_then(|p| awgr_output(table, p, arc.wavelength)) else {
                return;
            };
            for &l in &adj.out[head] {
                let next = &self.links[l];
                if next.from_port == Some(port) && next.carries(arc.wavelength) {
                    out.push(Arc { link: l, wavelength: arc.wavelength });
                }
            }
            return;
        }
        for &l in &adj.out[head] {
            if self.links[l].carries(arc.wavelength) {
                out.push(Arc { link: l, wavelength: arc.wavelength });
            }
        }
    }

    /// Devices reachable from `source` along wavelength-continuous routes
    /// that only transit devices accepted by `transit`.
    pub fn reachable_from(&self, source: usize, transit: impl Fn(usize) -> bool) -> Vec<bool> {
        let adj = self.adjacency();
        let mut reached = vec![false; self.devices.len()];
        reached[source] = true;
        let mut seen = std::collections::HashSet::new();
        let mut queue = VecDeque::new();
        let mut buf = Vec::new();
        self.source_arcs(&adj, source, &mut buf);
        for a in buf.drain(..) {
            if seen.insert(a) {
                queue.push_back(a);
            }
        }
        while let Some(arc) = queue.pop_front() {
            let head = self.links[arc.link].to;
            reached[head] = true;
            if !transit(head) {
                continue;
            }
            self.next_arcs(&adj, arc, &mut buf);
            for a in buf.drain(..) {
                if seen.insert(a) {
                    queue.push_back(a);
                }
            }
        }
        reached
    }

    /// Fewest-hop device path between two devices that respects wavelength
    /// continuity. Returns the device sequence including both ends.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        if from == to {
            return Some(vec![from]);
        }
        let adj = self.adjacency();
        let mut parent: std::collections::HashMap<Arc, Option<Arc>> = Default::default();
        let mut queue = VecDeque::new();
        let mut buf = Vec::new();
        self.source_arcs(&adj, from, &mut buf);
        for a in buf.drain(..) {
            parent.entry(a).or_insert_with(|| {
                queue.push_back(a);
                None
            });
        }
        while let Some(arc) = queue.pop_front() {
            if self.links[arc.link].to == to {
                let mut path = vec![to];
                let mut cur = Some(arc);
                while let Some(a) = cur {
                    path.push(self.links[a.link].from);
                    cur = parent[&a];
                }
                path.reverse();
                return Some(path);
            }
            self.next_arcs(&adj, arc, &mut buf);
            for a in buf.drain(..) {
                if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(a) {
                    e.insert(Some(arc));
                    queue.push_back(a);
                }
            }
        }
        None
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }
}

/// Checks every structural invariant; an empty list means the topology is
/// well formed.
pub fn validate(topology: &Topology) -> Vec<Violation> {
    let mut v = Vec::new();
    let n_dev = topology.devices.len();
    let name = |i: usize| {
        topology
            .devices
            .get(i)
            .map(|d| d.id.clone())
            .unwrap_or_else(|| format!("device#{i}"))
    };

    for (i, link) in topology.links.iter().enumerate() {
        let subject = format!("link#{i}");
        if link.from >= n_dev || link.to >= n_dev {
            v.push(Violation::new(subject, "endpoints", "link endpoint does not exist"));
            continue;
        }
        if link.from == link.to {
            v.push(Violation::new(subject.clone(), "endpoints", "self loop"));
        }
        if link.capacity.is_empty() {
            v.push(Violation::new(subject.clone(), "wavelengths", "link carries no wavelength"));
        }
        if link.capacity.values().any(|c| !(c.is_finite() && *c >= 0.0)) {
            v.push(Violation::new(subject, "capacity", "capacities must be finite and non-negative"));
        }
    }

    for d in &topology.devices {
        if !d.profile.is_valid() {
            v.push(Violation::new(&d.id, "power-profile", "requires 0 <= idle <= max"));
        }
        if !(d.capacity > 0.0 && d.capacity.is_finite()) {
            v.push(Violation::new(&d.id, "capacity", "capacity must be positive"));
        }
        if d.is_passive() && d.profile.max_power != 0.0 {
            v.push(Violation::new(&d.id, "passive", "passive devices draw no power"));
        }
        if d.wavelength_converting != d.kind.is_converting() {
            v.push(Violation::new(&d.id, "conversion", format!("{} conversion flag is wrong", d.kind)));
        }
    }

    for n in &topology.processing_nodes {
        if !(n.capacity > 0.0 && n.capacity.is_finite()) {
            v.push(Violation::new(&n.id, "capacity", "processing capacity must be positive"));
        }
        if !n.profile.is_valid() {
            v.push(Violation::new(&n.id, "power-profile", "requires 0 <= idle <= max"));
        }
        if n.attachment >= n_dev {
            v.push(Violation::new(&n.id, "attachment", "attachment device does not exist"));
        }
    }

    let mut users_per_ap = vec![0usize; n_dev];
    for u in &topology.users {
        match topology.devices.get(u.ap) {
            Some(d) if d.kind == DeviceKind::Ap => users_per_ap[u.ap] += 1,
            _ => v.push(Violation::new(&u.id, "user-ap", "user is not attached to an access point")),
        }
    }
    for (i, d) in topology.devices.iter().enumerate() {
        if d.kind == DeviceKind::Ap && users_per_ap[i] != 1 {
            v.push(Violation::new(
                &d.id,
                "one-user-per-ap",
                format!("access point serves {} users", users_per_ap[i]),
            ));
        }
    }

    for awgr in &topology.awgrs {
        for input in awgr.table.collisions() {
            v.push(Violation::new(
                name(awgr.device),
                "cyclic-router property",
                format!("input port {input} sends two wavelengths to one output"),
            ));
        }
    }
    for (i, d) in topology.devices.iter().enumerate() {
        if d.kind == DeviceKind::Awgr && topology.awgr_table(i).is_none() {
            v.push(Violation::new(&d.id, "awgr-table", "AWGR has no routing table"));
        }
    }

    if v.iter().any(|x| x.rule == "endpoints" || x.rule == "attachment") {
        return v;
    }

    let adj = topology.adjacency();
    if topology.backhaul == Backhaul::Pon {
        validate_pon_rooms(topology, &adj, &mut v);
    }

    // Custom fabrics need not include a cloud; any processing node will do.
    let cloud_attachments: Vec<usize> = if topology.backhaul == Backhaul::Custom {
        topology.processing_nodes.iter().map(|n| n.attachment).collect()
    } else {
        topology
            .nodes_of_tier(Tier::Cloud)
            .map(|i| topology.processing_nodes[i].attachment)
            .collect()
    };
    if cloud_attachments.is_empty() {
        v.push(Violation::new("topology", "cloud", "no cloud processing node"));
    } else {
        for u in &topology.users {
            if u.ap >= n_dev {
                continue;
            }
            let reach = topology.reachable_from(u.ap, |_| true);
            if !cloud_attachments.iter().any(|&c| reach[c]) {
                v.push(Violation::new(&u.id, "connectivity", "no route to the cloud"));
            }
        }
    }
    v
}

fn validate_pon_rooms(topology: &Topology, adj: &Adjacency, v: &mut Vec<Violation>) {
    let devices = &topology.devices;
    let links_between = |a: usize, b: usize| {
        adj.out[a].iter().filter(|&&l| topology.links[l].to == b).count()
    };
    for (r, room) in topology.rooms.iter().enumerate() {
        let (Some(splitter), Some(coupler)) = (room.splitter, room.coupler) else {
            v.push(Violation::new(format!("room#{r}"), "room-passives", "room lacks splitter or coupler"));
            continue;
        };
        for &ap in &room.aps {
            let onus: Vec<usize> = adj.out[ap]
                .iter()
                .map(|&l| topology.links[l].to)
                .filter(|&d| devices[d].kind == DeviceKind::Onu)
                .collect();
            if onus.len() != 1 {
                v.push(Violation::new(
                    &devices[ap].id,
                    "one-onu-per-ap",
                    format!("access point connects to {} ONUs", onus.len()),
                ));
            }
        }
        for &onu in &room.onus {
            let aps_up = adj.inc[onu]
                .iter()
                .filter(|&&l| devices[topology.links[l].from].kind == DeviceKind::Ap)
                .count();
            let aps_down = adj.out[onu]
                .iter()
                .filter(|&&l| devices[topology.links[l].to].kind == DeviceKind::Ap)
                .count();
            if aps_up != 1 || aps_down != 1 {
                v.push(Violation::new(&devices[onu].id, "onu-ap-link", "ONU must link to exactly one access point"));
            }
        }
        let fog_onus = topology
            .processing_nodes
            .iter()
            .filter(|n| n.tier == Tier::RoomFog && n.room == Some(r))
            .map(|n| n.attachment)
            .filter(|&a| devices[a].kind == DeviceKind::Onu);
        for onu in room.onus.iter().copied().chain(fog_onus) {
            if links_between(onu, splitter) != 1 || links_between(coupler, onu) != 1 {
                v.push(Violation::new(
                    &devices[onu].id,
                    "onu-splitter-coupler",
                    "ONU must connect upstream to its room splitter and downstream from its room coupler",
                ));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_parameters;

    #[test]
    fn default_builds_validate() {
        let p = default_parameters();
        assert_eq!(validate(&build_pon(&p).unwrap()), vec![]);
        assert_eq!(validate(&build_spine_leaf(&p).unwrap()), vec![]);
    }

    #[test]
    fn missing_ap_link_names_the_onu() {
        let p = default_parameters();
        let mut t = build_pon(&p).unwrap();
        let onu = t.rooms[1].onus[2];
        let devices = t.devices.clone();
        t.links.retain(|l| !(l.from == onu && devices[l.to].kind == DeviceKind::Ap));
        let v = validate(&t);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, "onu-ap-link");
        assert_eq!(v[0].subject, t.devices[onu].id);
    }

    #[test]
    fn colliding_awgr_table_reported() {
        let p = default_parameters();
        let mut t = build_pon(&p).unwrap();
        t.awgrs[0].table.entries[1][2] = Some(2);
        let v = validate(&t);
        assert!(v.iter().any(|x| x.rule == "cyclic-router property"), "{v:?}");
    }

    #[test]
    fn json_round_trip() {
        let t = build_pon(&default_parameters()).unwrap();
        let back: Topology = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
