use super::pon::{add_rooms_and_users, add_upper_chain};
use super::{Backhaul, Topology};
use crate::error::Result;
use crate::model::{DeviceKind, Link, NetworkDevice, ProcessingNode, Tier, Wavelength};
use crate::params::Parameters;

/// Builds the spine-and-leaf backhaul. Room `r` hangs off leaf `r mod
/// leaves`; every leaf connects to every spine, every spine to the router,
/// and the router to the shared upper chain. All links carry the single
/// electronic channel.
pub fn build_spine_leaf(p: &Parameters) -> Result<Topology> {
    p.validate()?;
    let mut t = Topology::empty(Backhaul::SpineLeaf);
    add_rooms_and_users(&mut t, p);
    let w0 = [Wavelength::AGGREGATE];
    let sw = &p.spine_leaf_switch;

    let leaves: Vec<usize> = (0..p.leaf_switches)
        .map(|i| t.add_device(NetworkDevice::new(format!("leaf-{i}"), DeviceKind::LeafSwitch, sw.capacity, sw.profile())))
        .collect();
    let spines: Vec<usize> = (0..p.spine_switches)
        .map(|i| t.add_device(NetworkDevice::new(format!("spine-{i}"), DeviceKind::SpineSwitch, sw.capacity, sw.profile())))
        .collect();
    let router = t.add_device(NetworkDevice::new("router", DeviceKind::Router, p.router.capacity, p.router.profile()));

    let access = p.access_link_capacity;
    for r in 0..p.rooms {
        let leaf = leaves[r % leaves.len()];
        if p.leaf_switches >= p.rooms {
            t.devices[leaf].room = Some(r);
        }
        t.rooms[r].leaf = Some(leaf);
        for a in 0..p.aps_per_room {
            let ap = t.rooms[r].aps[a];
            t.add_link(Link::new(ap, leaf, w0, access));
            t.add_link(Link::new(leaf, ap, w0, access));
        }
        t.add_node(ProcessingNode {
            id: format!("room-fog-r{r}"),
            tier: Tier::RoomFog,
            capacity: p.room_fog.capacity,
            profile: p.room_fog.profile(),
            attachment: leaf,
            room: Some(r),
            user: None,
        });
    }
    for &leaf in &leaves {
        for &spine in &spines {
            t.add_link(Link::new(leaf, spine, w0, sw.capacity));
            t.add_link(Link::new(spine, leaf, w0, sw.capacity));
        }
    }
    for &spine in &spines {
        t.add_link(Link::new(spine, router, w0, sw.capacity.min(p.router.capacity)));
    }
    add_upper_chain(&mut t, p, router);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_parameters;

    #[test]
    fn intra_room_route_uses_one_leaf() {
        let t = build_spine_leaf(&default_parameters()).unwrap();
        let path = t.shortest_path(t.rooms[0].aps[0], t.rooms[0].aps[5]).unwrap();
        let kinds: Vec<_> = path.iter().map(|&d| t.devices[d].kind).collect();
        assert_eq!(kinds, vec![DeviceKind::Ap, DeviceKind::LeafSwitch, DeviceKind::Ap]);
    }

    #[test]
    fn inter_room_route_crosses_spine() {
        let t = build_spine_leaf(&default_parameters()).unwrap();
        let path = t.shortest_path(t.rooms[0].aps[0], t.rooms[2].aps[5]).unwrap();
        let kinds: Vec<_> = path.iter().map(|&d| t.devices[d].kind).collect();
        assert_eq!(
            kinds,
            vec![DeviceKind::Ap, DeviceKind::LeafSwitch, DeviceKind::SpineSwitch, DeviceKind::LeafSwitch, DeviceKind::Ap]
        );
    }

    #[test]
    fn switch_parameters() {
        let t = build_spine_leaf(&default_parameters()).unwrap();
        for d in t.devices.iter().filter(|d| matches!(d.kind, DeviceKind::LeafSwitch | DeviceKind::SpineSwitch)) {
            assert_eq!(d.profile.max_power, 193.0);
            assert_eq!(d.profile.idle_power, 173.7);
            assert_eq!(d.capacity, 240000.0);
        }
        assert_eq!(t.devices.iter().filter(|d| d.kind == DeviceKind::LeafSwitch).count(), 4);
        assert_eq!(t.devices.iter().filter(|d| d.kind == DeviceKind::SpineSwitch).count(), 2);
    }
}
