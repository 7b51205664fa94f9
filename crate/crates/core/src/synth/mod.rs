//! Synthetic standard-cell families with analytic labels.
//!
//! Each (function, drive) pair is a cell type; each type has several
//! routed variants that share a netlist but differ in geometry. Labels come
//! from an Elmore RC model over the extracted wires and the device sizes.

mod config;
mod dataset;
mod extract;
mod families;
mod layout;
mod oracle;

pub use config::{FamilySpec, SynthConfig};
pub use dataset::{
    build_dataset, labels_csv, load_manifest, Dataset, Manifest, ManifestEntry, MANIFEST_VERSION,
};
pub use extract::{extract_rc, RcNet};
pub use families::Family;
pub use layout::{cell_height, cell_width, generate_layout, MAX_WIRE_WIDTH_NM};
pub use oracle::{elmore_times, label_cell, ElmoreTimes, Labels, LABEL_COLUMNS};

use crate::error::Result;
use crate::geometry::LayoutDesign;
use crate::netlist::{build_graph, parse_netlist};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Layout seed of one variant. Independent of drive, so every drive of a
/// variant is routed identically.
pub fn variant_seed(seed: u64, family: Family, variant: usize) -> u64 {
    let f = Family::ALL
        .iter()
        .position(|&x| x == family)
        .expect("family listed") as u64;
    splitmix64(splitmix64(splitmix64(seed) ^ f) ^ variant as u64)
}

pub fn cell_id(family: Family, drive: u32, variant: usize) -> String {
    format!("{}_v{variant:03}", family.cell_type(drive))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCell {
    pub id: String,
    pub cell_type: String,
    pub netlist: String,
    pub design: LayoutDesign,
}

pub fn generate_cell(
    family: Family,
    drive: u32,
    variant: usize,
    cfg: &SynthConfig,
) -> Result<GeneratedCell> {
    let id = cell_id(family, drive, variant);
    let design = generate_layout(family, variant_seed(cfg.seed, family, variant), &id, cfg)?;
    Ok(GeneratedCell {
        cell_type: family.cell_type(drive),
        netlist: family.netlist_text(drive, cfg),
        design,
        id,
    })
}

/// Parses, extracts and labels a generated cell.
pub fn label_generated(cell: &GeneratedCell, cfg: &SynthConfig) -> Result<Labels> {
    let graph = build_graph(&cell.cell_type, &parse_netlist(&cell.netlist)?)?;
    label_cell(&graph, &extract_rc(&cell.design, cfg), cfg)
}
