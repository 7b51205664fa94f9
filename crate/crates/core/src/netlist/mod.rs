//! Transistor netlists: a SPICE-subset reader and the device–net graph
//! built from it.

mod graph;
mod parse;

pub use graph::{
    build_graph, build_mask, encode_features, AdjacencyMask, CellGraph, ConnEdge, GraphInput, Net,
    NodeKind, EDGE_CONN, EDGE_CORR, EDGE_NONE, EDGE_SELF, NUM_FEATURES,
};
pub use parse::{
    parse_length_nm, parse_netlist, pin_role, write_netlist, Device, DeviceKind, ParsedNetlist,
    Pin, PinRole, Terminal,
};

use std::path::Path;

use crate::error::{Error, Result};

pub fn read_netlist(path: &Path) -> Result<ParsedNetlist> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_netlist(&text)
}
