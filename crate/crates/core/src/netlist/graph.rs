//! Heterogeneous device–net graph and its attention mask.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::parse::{Device, DeviceKind, ParsedNetlist, PinRole, Terminal};
use crate::error::{Error, Result};
use crate::numcore::Tensor;

/// Width of every node feature row.
pub const NUM_FEATURES: usize = 9;

pub const EDGE_NONE: u8 = 0;
pub const EDGE_CONN: u8 = 1;
pub const EDGE_CORR: u8 = 2;
pub const EDGE_SELF: u8 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub name: String,
    pub degree: usize,
    pub is_input: bool,
    pub is_output: bool,
    pub is_power: bool,
    pub is_ground: bool,
}

impl Net {
    pub fn is_supply(&self) -> bool {
        self.is_power || self.is_ground
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Device,
    Net,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConnEdge {
    pub device: usize,
    pub net: usize,
    pub terminal: Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellGraph {
    pub cell_type: String,
    pub devices: Vec<Device>,
    pub nets: Vec<Net>,
    pub conn_edges: Vec<ConnEdge>,
    /// Unordered net pairs stored once with `a < b`.
    pub corr_edges: Vec<(usize, usize)>,
    pub node_features: Tensor,
    pub node_kinds: Vec<NodeKind>,
}

impl CellGraph {
    pub fn num_nodes(&self) -> usize {
        self.devices.len() + self.nets.len()
    }

    /// Node index of net `i`; devices come first.
    pub fn net_node(&self, i: usize) -> usize {
        self.devices.len() + i
    }

    pub fn node_names(&self) -> Vec<String> {
        self.devices
            .iter()
            .map(|d| d.name.clone())
            .chain(self.nets.iter().map(|n| n.name.clone()))
            .collect()
    }

    /// Features, mask and labels as seen by the graph encoder.
    pub fn input(&self) -> GraphInput {
        GraphInput {
            features: self.node_features.clone(),
            mask: build_mask(self),
            kinds: self.node_kinds.clone(),
            names: self.node_names(),
        }
    }
}

/// Builds the graph for one cell. Nets are numbered by first appearance
/// scanning devices in file order and terminals in (d, g, s, b) order.
pub fn build_graph(cell_type: &str, netlist: &ParsedNetlist) -> Result<CellGraph> {
    if netlist.devices.is_empty() {
        return Err(Error::Graph(format!("{cell_type}: netlist has no devices")));
    }
    let roles: HashMap<&str, PinRole> = netlist
        .pins
        .iter()
        .map(|p| (p.name.as_str(), p.role))
        .collect();
    let mut nets: Vec<Net> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut conn_edges = Vec::new();
    for (di, dev) in netlist.devices.iter().enumerate() {
        for t in Terminal::ALL {
            let name = dev.terminal(t);
            let ni = *index.entry(name).or_insert_with(|| {
                let role = roles.get(name).copied();
                nets.push(Net {
                    name: name.to_string(),
                    degree: 0,
                    is_input: role == Some(PinRole::Input),
                    is_output: role == Some(PinRole::Output),
                    is_power: role == Some(PinRole::Power),
                    is_ground: role == Some(PinRole::Ground),
                });
                nets.len() - 1
            });
            nets[ni].degree += 1;
            conn_edges.push(ConnEdge {
                device: di,
                net: ni,
                terminal: t,
            });
        }
    }

    let mut corr = BTreeSet::new();
    for dev in &netlist.devices {
        let signal: BTreeSet<usize> = dev
            .terminals
            .iter()
            .map(|n| index[n.as_str()])
            .filter(|&i| !nets[i].is_supply())
            .collect();
        let signal: Vec<usize> = signal.into_iter().collect();
        for (k, &a) in signal.iter().enumerate() {
            for &b in &signal[k + 1..] {
                corr.insert((a, b));
            }
        }
    }

    let mut graph = CellGraph {
        cell_type: cell_type.to_string(),
        devices: netlist.devices.clone(),
        node_kinds: std::iter::repeat_n(NodeKind::Device, netlist.devices.len())
            .chain(std::iter::repeat_n(NodeKind::Net, nets.len()))
            .collect(),
        nets,
        conn_edges,
        corr_edges: corr.into_iter().collect(),
        node_features: Tensor::zeros(&[1, NUM_FEATURES]),
    };
    graph.node_features = encode_features(&graph);
    Ok(graph)
}

/// Device rows `[nmos, pmos, W/100, L/100, 0…]`, net rows
/// `[0, 0, 0, 0, degree/max_degree, in, out, power, ground]`.
pub fn encode_features(graph: &CellGraph) -> Tensor {
    let n = graph.num_nodes();
    let mut data = vec![0.0; n * NUM_FEATURES];
    for (i, d) in graph.devices.iter().enumerate() {
        let row = &mut data[i * NUM_FEATURES..(i + 1) * NUM_FEATURES];
        row[0] = f64::from(d.kind == DeviceKind::Nmos);
        row[1] = f64::from(d.kind == DeviceKind::Pmos);
        row[2] = d.width_nm / 100.0;
        row[3] = d.length_nm / 100.0;
    }
    let max_degree = graph
        .nets
        .iter()
        .map(|n| n.degree)
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    for (i, net) in graph.nets.iter().enumerate() {
        let r = graph.net_node(i);
        let row = &mut data[r * NUM_FEATURES..(r + 1) * NUM_FEATURES];
        row[4] = net.degree as f64 / max_degree;
        row[5] = f64::from(net.is_input);
        row[6] = f64::from(net.is_output);
        row[7] = f64::from(net.is_power);
        row[8] = f64::from(net.is_ground);
    }
    Tensor::new(vec![n, NUM_FEATURES], data).expect("feature matrix is well formed")
}

/// Row-major `N × N` attention mask with per-pair edge type.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMask {
    pub n: usize,
    pub edge_type: Vec<u8>,
}

impl AdjacencyMask {
    pub fn identity(n: usize) -> Self {
        let mut edge_type = vec![EDGE_NONE; n * n];
        for i in 0..n {
            edge_type[i * n + i] = EDGE_SELF;
        }
        Self { n, edge_type }
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.edge_type[i * self.n + j] != EDGE_NONE
    }

    pub fn edge_type(&self, i: usize, j: usize) -> u8 {
        self.edge_type[i * self.n + j]
    }

    pub fn allowed_flags(&self) -> Vec<bool> {
        self.edge_type.iter().map(|&t| t != EDGE_NONE).collect()
    }

    pub fn allowed_count(&self) -> usize {
        self.edge_type.iter().filter(|&&t| t != EDGE_NONE).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.edge_type(i, j) == self.edge_type(j, i)))
    }

    /// Reorders nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut edge_type = vec![EDGE_NONE; n * n];
        for a in 0..n {
            for b in 0..n {
                edge_type[a * n + b] = self.edge_type(perm[a], perm[b]);
            }
        }
        Self { n, edge_type }
    }
}

pub fn build_mask(graph: &CellGraph) -> AdjacencyMask {
    let n = graph.num_nodes();
    let mut mask = AdjacencyMask::identity(n);
    let mut set = |i: usize, j: usize, t: u8| {
        mask.edge_type[i * n + j] = t;
        mask.edge_type[j * n + i] = t;
    };
    for e in &graph.conn_edges {
        set(e.device, graph.net_node(e.net), EDGE_CONN);
    }
    for &(a, b) in &graph.corr_edges {
        set(graph.net_node(a), graph.net_node(b), EDGE_CORR);
    }
    mask
}

/// What the graph encoder consumes: one row per node plus the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInput {
    pub features: Tensor,
    pub mask: AdjacencyMask,
    pub kinds: Vec<NodeKind>,
    pub names: Vec<String>,
}

impl GraphInput {
    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    /// Reorders nodes so that new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let f = self.features.shape()[1];
        let mut data = Vec::with_capacity(perm.len() * f);
        for &p in perm {
            data.extend_from_slice(self.features.row(p));
        }
        Self {
            features: Tensor::new(vec![perm.len(), f], data).expect("permutation keeps shape"),
            mask: self.mask.permuted(perm),
            kinds: perm.iter().map(|&p| self.kinds[p]).collect(),
            names: perm.iter().map(|&p| self.names[p].clone()).collect(),
        }
    }
}
