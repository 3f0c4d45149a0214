use super::{AwgrPlacement, AwgrRoutingTable, Backhaul, Room, Topology, User, PON_WAVELENGTHS, UPLINK_WAVELENGTH};
use crate::error::{Error, Result};
use crate::model::{DeviceKind, Link, NetworkDevice, PowerProfile, ProcessingNode, Tier, Wavelength};
use crate::params::{DeviceParams, Parameters};

fn wavelengths(range: std::ops::Range<usize>) -> impl Iterator<Item = Wavelength> {
    range.map(|w| Wavelength(w as u8))
}

/// Adds the APs and users of every room and the mobile processing nodes of
/// the users that offer their resources.
pub(super) fn add_rooms_and_users(t: &mut Topology, p: &Parameters) {
    for r in 0..p.rooms {
        let mut room = Room::default();
        for a in 0..p.aps_per_room {
            let ap = t.add_device(
                NetworkDevice::new(
                    format!("ap-r{r}-{a}"),
                    DeviceKind::Ap,
                    p.access_point.capacity,
                    p.access_point.profile(),
                )
                .in_room(r),
            );
            let demanding = a < p.demanders_per_room;
            t.users.push(User {
                id: format!("user-r{r}-{a}"),
                room: Some(r),
                ap,
                demanding,
            });
            let user = t.users.len() - 1;
            if !demanding {
                t.add_node(ProcessingNode {
                    id: format!("mobile-r{r}-{a}"),
                    tier: Tier::Mobile,
                    capacity: p.mobile.capacity,
                    profile: p.mobile.profile(),
                    attachment: ap,
                    room: Some(r),
                    user: Some(user),
                });
            }
            room.aps.push(ap);
            room.users.push(user);
        }
        t.rooms.push(room);
    }
}

fn chain_device(t: &mut Topology, id: &str, kind: DeviceKind, d: &DeviceParams, prev: usize) -> usize {
    let cur = t.add_device(NetworkDevice::new(id, kind, d.capacity, d.profile()));
    let cap = t.devices[prev].capacity.min(d.capacity);
    t.add_link(Link::new(prev, cur, [Wavelength::AGGREGATE], cap));
    cur
}

/// Builds `Ethernet switch → aggregation switch → edge router → optical
/// switch → core router` above `head` and attaches the building, campus,
/// metro and cloud tiers along it.
pub(super) fn add_upper_chain(t: &mut Topology, p: &Parameters, head: usize) {
    let eth = chain_device(t, "ethernet-switch", DeviceKind::EthernetSwitch, &p.ethernet_switch, head);
    let agg = chain_device(t, "aggregation-switch", DeviceKind::AggregationSwitch, &p.aggregation_switch, eth);
    let edge = chain_device(t, "edge-router", DeviceKind::EdgeRouter, &p.edge_router, agg);
    let optical = chain_device(t, "optical-switch", DeviceKind::OpticalSwitch, &p.optical_switch, edge);
    let core = chain_device(t, "core-router", DeviceKind::CoreRouter, &p.core_router, optical);

    for (id, tier, params, at) in [
        ("building-fog", Tier::BuildingFog, &p.building_fog, eth),
        ("campus-fog", Tier::CampusFog, &p.campus_fog, agg),
        ("metro-fog", Tier::MetroFog, &p.metro_fog, edge),
    ] {
        t.add_node(ProcessingNode {
            id: id.to_string(),
            tier,
            capacity: params.capacity,
            profile: params.profile(),
            attachment: at,
            room: None,
            user: None,
        });
    }
    for c in 0..p.cloud_servers {
        t.add_node(ProcessingNode {
            id: format!("cloud-{c}"),
            tier: Tier::Cloud,
            capacity: p.cloud.capacity,
            profile: p.cloud.profile(),
            attachment: core,
            room: None,
            user: None,
        });
    }
}

/// Builds the PON backhaul: one ONU per AP, a splitter and a coupler per
/// room, an upstream AWGR fed by the splitters and a downstream AWGR fed by
/// the OLT, both feeding the couplers; a dedicated uplink wavelength from
/// every splitter to the OLT; and the shared upper chain.
pub fn build_pon(p: &Parameters) -> Result<Topology> {
    p.validate()?;
    let table = match &p.awgr_table {
        Some(entries) => AwgrRoutingTable::from_entries(entries.clone()),
        None => AwgrRoutingTable::cyclic(4, PON_WAVELENGTHS),
    };
    if table.ports != p.rooms {
        return Err(Error::Config(format!(
            "{} rooms cannot be served by a {0}x{0} AWGR plan: {1} ports",
            p.rooms, table.ports
        )));
    }
    if table.entries.iter().any(|row| row.len() > PON_WAVELENGTHS) {
        return Err(Error::Config(format!("AWGR table lists more than {PON_WAVELENGTHS} wavelengths")));
    }
    if table.entries.iter().flatten().flatten().any(|&o| o >= table.ports) {
        return Err(Error::Config("AWGR table routes to a missing port".into()));
    }

    let mut t = Topology::empty(Backhaul::Pon);
    add_rooms_and_users(&mut t, p);

    let line = p.passive_wavelength_capacity;
    let access = p.access_link_capacity;
    let routed = PON_WAVELENGTHS - 1;
    let passive = |id: String, kind, capacity: f64, room: Option<usize>| {
        let d = NetworkDevice::new(id, kind, capacity, PowerProfile::PASSIVE);
        match room {
            Some(r) => d.in_room(r),
            None => d,
        }
    };

    for r in 0..p.rooms {
        let split_cap = line * PON_WAVELENGTHS as f64;
        let splitter = t.add_device(passive(format!("splitter-r{r}"), DeviceKind::Splitter, split_cap, Some(r)));
        let coupler = t.add_device(passive(format!("coupler-r{r}"), DeviceKind::Coupler, split_cap, Some(r)));
        t.rooms[r].splitter = Some(splitter);
        t.rooms[r].coupler = Some(coupler);
        for a in 0..p.aps_per_room {
            let ap = t.rooms[r].aps[a];
            let onu = t.add_device(
                NetworkDevice::new(format!("onu-r{r}-{a}"), DeviceKind::Onu, p.onu.capacity, p.onu.profile())
                    .in_room(r),
            );
            t.rooms[r].onus.push(onu);
            t.add_link(Link::new(ap, onu, wavelengths(0..PON_WAVELENGTHS), access));
            t.add_link(Link::new(onu, ap, wavelengths(0..PON_WAVELENGTHS), access));
            t.add_link(Link::new(onu, splitter, wavelengths(0..PON_WAVELENGTHS), line));
            t.add_link(Link::new(coupler, onu, wavelengths(0..PON_WAVELENGTHS), line));
        }
        let fog_onu = t.add_device(
            NetworkDevice::new(format!("onu-fog-r{r}"), DeviceKind::Onu, p.onu.capacity, p.onu.profile()).in_room(r),
        );
        t.add_link(Link::new(fog_onu, splitter, wavelengths(0..PON_WAVELENGTHS), line));
        t.add_link(Link::new(coupler, fog_onu, wavelengths(0..PON_WAVELENGTHS), line));
        t.add_node(ProcessingNode {
            id: format!("room-fog-r{r}"),
            tier: Tier::RoomFog,
            capacity: p.room_fog.capacity,
            profile: p.room_fog.profile(),
            attachment: fog_onu,
            room: Some(r),
            user: None,
        });
    }

    let awgr_cap = line * (table.ports * routed) as f64;
    let awgr_u = t.add_device(passive("awgr-u".into(), DeviceKind::Awgr, awgr_cap, None));
    let awgr_d = t.add_device(passive("awgr-d".into(), DeviceKind::Awgr, awgr_cap, None));
    t.awgrs.push(AwgrPlacement { device: awgr_u, table: table.clone() });
    t.awgrs.push(AwgrPlacement { device: awgr_d, table: table.clone() });
    let olt = t.add_device(NetworkDevice::new("olt", DeviceKind::Olt, p.olt.capacity, p.olt.profile()));

    for r in 0..p.rooms {
        let splitter = t.rooms[r].splitter.unwrap();
        let coupler = t.rooms[r].coupler.unwrap();
        t.add_link(Link::new(splitter, awgr_u, wavelengths(0..routed), line).with_ports(None, Some(r)));
        t.add_link(Link::new(awgr_u, coupler, wavelengths(0..routed), line).with_ports(Some(r), None));
        t.add_link(Link::new(awgr_d, coupler, wavelengths(0..routed), line).with_ports(Some(r), None));
        t.add_link(Link::new(splitter, olt, [UPLINK_WAVELENGTH], line));
    }
    t.add_link(Link::new(olt, awgr_d, wavelengths(0..routed), line).with_ports(None, Some(0)));

    add_upper_chain(&mut t, p, olt);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_parameters;
    use crate::topology::validate;

    #[test]
    fn default_counts() {
        let t = build_pon(&default_parameters()).unwrap();
        let count = |k| t.devices.iter().filter(|d| d.kind == k).count();
        assert_eq!(count(DeviceKind::Ap), 32);
        assert_eq!(count(DeviceKind::Onu), 36);
        assert_eq!(count(DeviceKind::Splitter), 4);
        assert_eq!(count(DeviceKind::Coupler), 4);
        assert_eq!(count(DeviceKind::Awgr), 2);
        assert_eq!(count(DeviceKind::Olt), 1);
        assert_eq!(t.users.len(), 32);
        assert_eq!(t.demanders().count(), 16);
        let fogs: Vec<_> = t.nodes_of_tier(Tier::RoomFog).collect();
        assert_eq!(fogs.len(), 4);
        let total: f64 = fogs.iter().map(|&i| t.processing_nodes[i].capacity).sum();
        assert_eq!(total, 20000.0);
        assert_eq!(t.processing_nodes.len(), 16 + 4 + 1 + 1 + 1 + 1);
    }

    #[test]
    fn every_room_pair_reachable_through_awgr() {
        let t = build_pon(&default_parameters()).unwrap();
        let passive_only = |d: usize| t.devices[d].is_passive();
        for r in 0..4 {
            let reach = t.reachable_from(t.rooms[r].splitter.unwrap(), passive_only);
            for r2 in 0..4 {
                assert!(reach[t.rooms[r2].coupler.unwrap()], "room {r} -> room {r2}");
            }
        }
    }

    #[test]
    fn every_room_reaches_olt() {
        let t = build_pon(&default_parameters()).unwrap();
        let olt = t.device_index("olt").unwrap();
        for r in 0..4 {
            let reach = t.reachable_from(t.rooms[r].splitter.unwrap(), |_| false);
            assert!(reach[olt]);
        }
    }

    #[test]
    fn wrong_room_count_rejected() {
        let mut p = default_parameters();
        p.rooms = 5;
        assert!(matches!(build_pon(&p), Err(Error::Config(_))));
        p.rooms = 3;
        assert!(matches!(build_pon(&p), Err(Error::Config(_))));
    }

    #[test]
    fn custom_three_port_plan() {
        let mut p = default_parameters();
        p.rooms = 3;
        p.awgr_table = Some(AwgrRoutingTable::cyclic(3, 5).entries);
        let t = build_pon(&p).unwrap();
        assert_eq!(validate(&t), vec![]);
    }

    #[test]
    fn rebuild_is_identical() {
        let p = default_parameters();
        assert_eq!(build_pon(&p).unwrap(), build_pon(&p).unwrap());
    }
}
