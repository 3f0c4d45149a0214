use serde::{Deserialize, Serialize};

use crate::model::Wavelength;

/// Static wavelength routing of an N×N arrayed waveguide grating router:
/// `(input port, wavelength) → output port`. Missing entries mean the
/// wavelength is not routable from that port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AwgrRoutingTable {
    pub ports: usize,
    /// `entries[input][wavelength]`.
    pub entries: Vec<Vec<Option<usize>>>,
}

impl AwgrRoutingTable {
    /// Cyclic plan: wavelength `k < ports` leaves input `p` at `(p + k) mod ports`;
    /// wavelengths `ports..wavelengths` are not routed.
    pub fn cyclic(ports: usize, wavelengths: usize) -> Self {
        let entries = (0..ports)
            .map(|p| {
                (0..wavelengths)
                    .map(|k| (k < ports).then(|| (p + k) % ports))
                    .collect()
            })
            .collect();
        Self { ports, entries }
    }

    pub fn from_entries(entries: Vec<Vec<Option<usize>>>) -> Self {
        Self {
            ports: entries.len(),
            entries,
        }
    }

    /// Input ports whose wavelengths collide on one output.
    pub fn collisions(&self) -> Vec<usize> {
        let mut bad = Vec::new();
        for (input, row) in self.entries.iter().enumerate() {
            let mut used = vec![false; self.ports.max(1)];
            for out in row.iter().flatten() {
                if *out >= self.ports || std::mem::replace(&mut used[*out], true) {
                    bad.push(input);
                    break;
                }
            }
        }
        bad
    }

    /// The input port that reaches `output` on `wavelength`, if any.
    pub fn input_for(&self, output: usize, wavelength: Wavelength) -> Option<usize> {
        (0..self.ports).find(|&p| awgr_output(self, p, wavelength) == Some(output))
    }
}

/// Output port for a wavelength entering at `input_port`, or `None` when
/// that wavelength is not routable there.
pub fn awgr_output(table: &AwgrRoutingTable, input_port: usize, wavelength: Wavelength) -> Option<usize> {
    table
        .entries
        .get(input_port)?
        .get(wavelength.index())
        .copied()
        .flatten()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_lookup() {
        let t = AwgrRoutingTable::cyclic(4, 5);
        assert_eq!(awgr_output(&t, 0, Wavelength(0)), Some(0));
        for r in 0..4 {
            for k in 0..4u8 {
                assert_eq!(awgr_output(&t, r, Wavelength(k)), Some((r + k as usize) % 4));
            }
            assert_eq!(awgr_output(&t, r, Wavelength(4)), None);
        }
        assert_eq!(awgr_output(&t, 9, Wavelength(0)), None);
        assert!(t.collisions().is_empty());
        assert_eq!(t.input_for(1, Wavelength(3)), Some(2));
    }

    #[test]
    fn distinct_wavelengths_leave_on_distinct_ports() {
        let t = AwgrRoutingTable::cyclic(4, 5);
        assert_ne!(awgr_output(&t, 1, Wavelength(1)), awgr_output(&t, 1, Wavelength(2)));
    }

    #[test]
    fn collision_detected() {
        let mut t = AwgrRoutingTable::cyclic(4, 5);
        t.entries[2][1] = Some(2);
        assert_eq!(t.collisions(), vec![2]);
    }
}
