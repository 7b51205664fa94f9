//! Elmore-delay and switching-energy labels.
//!
//! Each conducting channel path from the output to a rail is an RC chain:
//! every device contributes its on-resistance `k·L/W`, every net on the
//! path its wire resistance, and every net its wire capacitance (ground
//! plus coupling), the diffusion capacitance of the channel terminals on
//! it, and the load if it is the output. The slowest path sets the delay.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{RcNet, SynthConfig};
use crate::error::{Error, Result};
use crate::netlist::{CellGraph, DeviceKind, Terminal};

/// Column names of the label table, in target order.
pub const LABEL_COLUMNS: [&str; 6] = [
    "rise_delay_ps",
    "fall_delay_ps",
    "rise_trans_ps",
    "fall_trans_ps",
    "rise_power_fj",
    "fall_power_fj",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub rise_delay_ps: f64,
    pub fall_delay_ps: f64,
    pub rise_trans_ps: f64,
    pub fall_trans_ps: f64,
    pub rise_power_fj: f64,
    pub fall_power_fj: f64,
}

impl Labels {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.rise_delay_ps,
            self.fall_delay_ps,
            self.rise_trans_ps,
            self.fall_trans_ps,
            self.rise_power_fj,
            self.fall_power_fj,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            rise_delay_ps: v[0],
            fall_delay_ps: v[1],
            rise_trans_ps: v[2],
            fall_trans_ps: v[3],
            rise_power_fj: v[4],
            fall_power_fj: v[5],
        }
    }
}

/// Time constants (Ω·fF) of the slowest pull-up and pull-down paths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElmoreTimes {
    pub rise: f64,
    pub fall: f64,
}

struct Circuit<'a> {
    graph: &'a CellGraph,
    cfg: &'a SynthConfig,
    cap_ff: Vec<f64>,
    wire_ohm: Vec<f64>,
    output: usize,
}

impl<'a> Circuit<'a> {
    fn new(graph: &'a CellGraph, rc: &[RcNet], cfg: &'a SynthConfig) -> Result<Self> {
        let outputs: Vec<usize> = (0..graph.nets.len())
            .filter(|&i| graph.nets[i].is_output)
            .collect();
        let &[output] = outputs.as_slice() else {
            return Err(Error::Synth(format!(
                "{}: expected one output net, found {}",
                graph.cell_type,
                outputs.len()
            )));
        };
        let by_name: HashMap<&str, &RcNet> = rc.iter().map(|r| (r.net.as_str(), r)).collect();
        let mut cap_ff = vec![0.0; graph.nets.len()];
        let mut wire_ohm = vec![0.0; graph.nets.len()];
        for (i, net) in graph.nets.iter().enumerate() {
            if net.is_supply() {
                continue;
            }
            let r = by_name.get(net.name.as_str()).ok_or_else(|| {
                Error::Synth(format!(
                    "{}: no RC entry for net {}",
                    graph.cell_type, net.name
                ))
            })?;
            cap_ff[i] = r.total_cap_ff();
            wire_ohm[i] = r.resistance_ohm;
        }
        for e in &graph.conn_edges {
            if matches!(e.terminal, Terminal::Drain | Terminal::Source) {
                cap_ff[e.net] +=
                    cfg.diffusion_cap_af_per_nm * graph.devices[e.device].width_nm * 1e-3;
            }
        }
        cap_ff[output] += cfg.load_cap_ff;
        Ok(Self {
            graph,
            cfg,
            cap_ff,
            wire_ohm,
            output,
        })
    }

    fn on_resistance(&self, device: usize) -> f64 {
        let d = &self.graph.devices[device];
        let k = match d.kind {
            DeviceKind::Nmos => self.cfg.nmos_k_ohm,
            DeviceKind::Pmos => self.cfg.pmos_k_ohm,
        };
        k * d.length_nm / d.width_nm
    }

    fn channel(&self, device: usize) -> (usize, usize) {
        let net = |t: Terminal| {
            let name = self.graph.devices[device].terminal(t);
            self.graph
                .nets
                .iter()
                .position(|n| n.name == name)
                .expect("terminal net exists")
        };
        (net(Terminal::Drain), net(Terminal::Source))
    }

    /// Every simple channel path from the output to a rail through
    /// devices of `kind`, as the device sequence starting at the output.
    fn paths(&self, kind: DeviceKind) -> Vec<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        let mut stack = vec![(self.output, Vec::<(usize, usize)>::new(), vec![self.output])];
        while let Some((net, path, visited)) = stack.pop() {
            for dev in 0..self.graph.devices.len() {
                if self.graph.devices[dev].kind != kind || path.iter().any(|&(d, _)| d == dev) {
                    continue;
                }
                let (d, s) = self.channel(dev);
                let next = if d == net {
                    s
                } else if s == net {
                    d
                } else {
                    continue;
                };
                if visited.contains(&next) {
                    continue;
                }
                let mut p = path.clone();
                p.push((dev, next));
                let rail = &self.graph.nets[next];
                let target = match kind {
                    DeviceKind::Nmos => rail.is_ground,
                    DeviceKind::Pmos => rail.is_power,
                };
                if target {
                    out.push(p);
                } else if !rail.is_supply() {
                    let mut v = visited.clone();
                    v.push(next);
                    stack.push((next, p, v));
                }
            }
        }
        out
    }

    /// Elmore sum along a path, accumulating resistance from the rail.
    fn elmore(&self, path: &[(usize, usize)]) -> f64 {
        let mut tau = 0.0;
        let mut upstream = 0.0;
        for k in (0..path.len()).rev() {
            let node = if k == 0 { self.output } else { path[k - 1].1 };
            upstream += self.on_resistance(path[k].0) + self.wire_ohm[node];
            tau += self.cap_ff[node] * upstream;
        }
        tau
    }

    fn worst(&self, kind: DeviceKind) -> Result<f64> {
        let paths = self.paths(kind);
        if paths.is_empty() {
            return Err(Error::Synth(format!(
                "{}: no {kind:?} path from output to rail",
                self.graph.cell_type
            )));
        }
        Ok(paths.iter().map(|p| self.elmore(p)).fold(0.0, f64::max))
    }

    /// Output plus every internal node of the network of `kind`.
    fn switched_cap(&self, kind: DeviceKind) -> f64 {
        let mut nodes = vec![self.output];
        for dev in 0..self.graph.devices.len() {
            if self.graph.devices[dev].kind != kind {
                continue;
            }
            let (d, s) = self.channel(dev);
            for n in [d, s] {
                if !self.graph.nets[n].is_supply() && !nodes.contains(&n) {
                    nodes.push(n);
                }
            }
        }
        nodes.iter().map(|&n| self.cap_ff[n]).sum()
    }
}

pub fn elmore_times(graph: &CellGraph, rc: &[RcNet], cfg: &SynthConfig) -> Result<ElmoreTimes> {
    let c = Circuit::new(graph, rc, cfg)?;
    Ok(ElmoreTimes {
        rise: c.worst(DeviceKind::Pmos)?,
        fall: c.worst(DeviceKind::Nmos)?,
    })
}

/// Delay `ln 2 · τ`, 10–90 % transition `ln 9 · τ`, energy `½ C V²`.
pub fn label_cell(graph: &CellGraph, rc: &[RcNet], cfg: &SynthConfig) -> Result<Labels> {
    let c = Circuit::new(graph, rc, cfg)?;
    // Ω·fF is 1e-3 ps; fF·V² is fJ.
    let ps = 1e-3;
    let rise = c.worst(DeviceKind::Pmos)? * ps;
    let fall = c.worst(DeviceKind::Nmos)? * ps;
    let half_v2 = 0.5 * cfg.vdd_v * cfg.vdd_v;
    let labels = Labels {
        rise_delay_ps: std::f64::consts::LN_2 * rise,
        fall_delay_ps: std::f64::consts::LN_2 * fall,
        rise_trans_ps: 9f64.ln() * rise,
        fall_trans_ps: 9f64.ln() * fall,
        rise_power_fj: half_v2 * c.switched_cap(DeviceKind::Pmos),
        fall_power_fj: half_v2 * c.switched_cap(DeviceKind::Nmos),
    };
    if labels
        .to_array()
        .iter()
        .any(|v| !(v.is_finite() && *v > 0.0))
    {
        return Err(Error::Synth(format!(
            "{}: non-positive label {labels:?}",
            graph.cell_type
        )));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_graph, parse_netlist};

    fn zero_rc(g: &CellGraph) -> Vec<RcNet> {
        g.nets
            .iter()
            .map(|n| RcNet {
                net: n.name.clone(),
                resistance_ohm: 0.0,
                ground_cap_ff: 0.0,
                coupling_ff: vec![],
            })
            .collect()
    }

    #[test]
    fn inverter_closed_form() {
        let cfg = SynthConfig::default();
        let text = ".SUBCKT INV A Y VDD VSS\nMN0 Y A VSS VSS nmos W=80n L=20n\nMP0 Y A VDD VDD pmos W=120n L=20n\n.ENDS\n";
        let g = build_graph("INV", &parse_netlist(text).unwrap()).unwrap();
        let l = label_cell(&g, &zero_rc(&g), &cfg).unwrap();
        let c = cfg.diffusion_cap_af_per_nm * (80.0 + 120.0) * 1e-3 + cfg.load_cap_ff;
        let r_n = cfg.nmos_k_ohm * 20.0 / 80.0;
        let r_p = cfg.pmos_k_ohm * 20.0 / 120.0;
        assert!((l.fall_delay_ps - 2f64.ln() * r_n * c * 1e-3).abs() < 1e-12);
        assert!((l.rise_delay_ps - 2f64.ln() * r_p * c * 1e-3).abs() < 1e-12);
        assert!((l.fall_trans_ps - 9f64.ln() * r_n * c * 1e-3).abs() < 1e-12);
        assert!((l.rise_power_fj - 0.5 * 0.49 * c).abs() < 1e-12);
    }

    #[test]
    fn stacked_pull_down_uses_both_devices() {
        let cfg = SynthConfig::default();
        let text = include_str!("../../fixtures/nand2.sp");
        let g = build_graph("NAND2", &parse_netlist(text).unwrap()).unwrap();
        let t = elmore_times(&g, &zero_rc(&g), &cfg).unwrap();
        let r = cfg.nmos_k_ohm * 20.0 / 80.0;
        let cd = cfg.diffusion_cap_af_per_nm * 1e-3;
        let c_n1 = cd * 160.0;
        let c_y = cd * (80.0 + 240.0) + cfg.load_cap_ff;
        assert!((t.fall - (r * c_n1 + 2.0 * r * c_y)).abs() < 1e-9);
        // Pull-up: either PMOS alone.
        let rp = cfg.pmos_k_ohm * 20.0 / 120.0;
        assert!((t.rise - rp * c_y).abs() < 1e-9);
    }

    #[test]
    fn missing_rc_entry_is_an_error() {
        let g = build_graph(
            "INV",
            &parse_netlist(include_str!("../../fixtures/inv.sp")).unwrap(),
        )
        .unwrap();
        let mut rc = zero_rc(&g);
        rc.retain(|r| r.net != "Y");
        assert!(label_cell(&g, &rc, &SynthConfig::default()).is_err());
    }
}
