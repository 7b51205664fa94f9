//! Transistor topologies of the supported cell functions.

use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::error::{Error, Result};
use crate::netlist::{pin_role, write_netlist, Device, DeviceKind, Pin};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "INV")]
    Inv,
    #[serde(rename = "NAND2")]
    Nand2,
    #[serde(rename = "NOR2")]
    Nor2,
    #[serde(rename = "AOI21")]
    Aoi21,
}

/// `(name, kind, drain, gate, source)`; bulk ties to the matching rail.
type DeviceSpec = (
    &'static str,
    DeviceKind,
    &'static str,
    &'static str,
    &'static str,
);

use DeviceKind::{Nmos as N, Pmos as P};

impl Family {
    pub const ALL: [Family; 4] = [Family::Inv, Family::Nand2, Family::Nor2, Family::Aoi21];

    pub fn name(self) -> &'static str {
        match self {
            Family::Inv => "INV",
            Family::Nand2 => "NAND2",
            Family::Nor2 => "NOR2",
            Family::Aoi21 => "AOI21",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Synth(format!("unsupported cell function {s:?}")))
    }

    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Family::Inv => &["A"],
            Family::Nand2 | Family::Nor2 => &["A", "B"],
            Family::Aoi21 => &["A1", "A2", "B"],
        }
    }

    fn devices(self) -> &'static [DeviceSpec] {
        match self {
            Family::Inv => &[("MN0", N, "Y", "A", "VSS"), ("MP0", P, "Y", "A", "VDD")],
            Family::Nand2 => &[
                ("MN0", N, "n1", "A", "VSS"),
                ("MN1", N, "Y", "B", "n1"),
                ("MP0", P, "Y", "A", "VDD"),
                ("MP1", P, "Y", "B", "VDD"),
            ],
            Family::Nor2 => &[
                ("MN0", N, "Y", "A", "VSS"),
                ("MN1", N, "Y", "B", "VSS"),
                ("MP0", P, "n1", "A", "VDD"),
                ("MP1", P, "Y", "B", "n1"),
            ],
            Family::Aoi21 => &[
                ("MN0", N, "n1", "A1", "VSS"),
                ("MN1", N, "Y", "A2", "n1"),
                ("MN2", N, "Y", "B", "VSS"),
                ("MP0", P, "n2", "B", "VDD"),
                ("MP1", P, "Y", "A1", "n2"),
                ("MP2", P, "Y", "A2", "n2"),
            ],
        }
    }

    /// Terminal order along the N and P diffusion rows; odd positions are
    /// gates, even positions diffusion contacts.
    pub fn rows(self) -> (&'static [&'static str], &'static [&'static str]) {
        match self {
            Family::Inv => (&["VSS", "A", "Y"], &["VDD", "A", "Y"]),
            Family::Nand2 => (
                &["VSS", "A", "n1", "B", "Y"],
                &["VDD", "A", "Y", "B", "VDD"],
            ),
            Family::Nor2 => (
                &["VSS", "A", "Y", "B", "VSS"],
                &["VDD", "A", "n1", "B", "Y"],
            ),
            Family::Aoi21 => (
                &["VSS", "A1", "n1", "A2", "Y", "B", "VSS"],
                &["VDD", "B", "n2", "A1", "Y", "A2", "n2"],
            ),
        }
    }

    pub fn cell_type(self, drive: u32) -> String {
        format!("{}_D{drive}", self.name())
    }

    pub fn pins(self) -> Vec<Pin> {
        self.inputs()
            .iter()
            .copied()
            .chain(["Y", "VDD", "VSS"])
            .map(|p| Pin {
                name: p.to_string(),
                role: pin_role(p),
            })
            .collect()
    }

    pub fn build_devices(self, drive: u32, cfg: &SynthConfig) -> Vec<Device> {
        self.devices()
            .iter()
            .map(|&(name, kind, d, g, s)| {
                let (width, bulk) = match kind {
                    N => (cfg.nmos_width_nm, "VSS"),
                    P => (cfg.pmos_width_nm, "VDD"),
                };
                Device {
                    name: name.to_string(),
                    kind,
                    width_nm: width * drive as f64,
                    length_nm: cfg.channel_length_nm,
                    terminals: [d, g, s, bulk].map(str::to_string),
                }
            })
            .collect()
    }

    pub fn netlist_text(self, drive: u32, cfg: &SynthConfig) -> String {
        let header = format!("* {} drive {drive}\n", self.name());
        header
            + &write_netlist(
                &self.cell_type(drive),
                &self.pins(),
                &self.build_devices(drive, cfg),
            )
    }

    /// Layout net order: signal nets by first appearance in the device
    /// list, then VDD and VSS.
    pub fn net_order(self) -> Vec<String> {
        let mut nets: Vec<String> = Vec::new();
        for &(_, _, d, g, s) in self.devices() {
            for n in [d, g, s] {
                if n != "VDD" && n != "VSS" && !nets.iter().any(|x| x == n) {
                    nets.push(n.to_string());
                }
            }
        }
        nets.push("VDD".into());
        nets.push("VSS".into());
        nets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_graph, parse_netlist};

    #[test]
    fn euler_rows_match_devices() {
        for f in Family::ALL {
            let (n_row, p_row) = f.rows();
            for (row, kind) in [(n_row, N), (p_row, P)] {
                let mut seen = 0;
                for g in (1..row.len()).step_by(2) {
                    let dev = f
                        .devices()
                        .iter()
                        .find(|d| d.1 == kind && d.3 == row[g])
                        .unwrap_or_else(|| panic!("{f:?}: no {kind:?} gated by {}", row[g]));
                    let ends = [row[g - 1], row[g + 1]];
                    assert!(
                        ends.contains(&dev.2) && ends.contains(&dev.4),
                        "{f:?} {}",
                        dev.0
                    );
                    seen += 1;
                }
                assert_eq!(seen, f.devices().iter().filter(|d| d.1 == kind).count());
            }
        }
    }

    #[test]
    fn netlist_text_parses_and_scales_with_drive() {
        let cfg = SynthConfig::default();
        for f in Family::ALL {
            let n1 = parse_netlist(&f.netlist_text(1, &cfg)).unwrap();
            let n2 = parse_netlist(&f.netlist_text(2, &cfg)).unwrap();
            for (a, b) in n1.devices.iter().zip(&n2.devices) {
                assert_eq!(b.width_nm, 2.0 * a.width_nm);
            }
            let g = build_graph(&f.cell_type(1), &n1).unwrap();
            assert_eq!(g.nets.iter().filter(|n| n.is_output).count(), 1);
        }
    }

    #[test]
    fn supplies_come_last_in_net_order() {
        let order = Family::Aoi21.net_order();
        assert_eq!(
            &order[order.len() - 2..],
            &["VDD".to_string(), "VSS".to_string()]
        );
        assert_eq!(order.len(), 8);
    }
}
