use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fusion::{ModelInput, Variant, NUM_TARGETS};
use crate::geometry::{rasterize, read_layout, RasterConfig};
use crate::netlist::{build_graph, read_netlist};
use crate::synth::Dataset;

/// One cell ready for the model: rasterized layout, optional graph and
/// raw-unit targets.
#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub cell_type: String,
    pub input: ModelInput,
    pub target: [f64; NUM_TARGETS],
}

/// Files touched while loading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub layouts_read: usize,
    pub netlists_read: usize,
}

/// Loads `ids` in the given order. Netlists are read only when the variant
/// consumes a graph.
pub fn load_samples(
    data: &Dataset,
    ids: &[String],
    raster: &RasterConfig,
    variant: Variant,
) -> Result<(Vec<Sample>, LoadStats)> {
    let index: HashMap<&str, usize> = data
        .manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let mut stats = LoadStats::default();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let e = &data.manifest.entries[*index
            .get(id.as_str())
            .ok_or_else(|| Error::Dataset(format!("unknown cell {id}")))?];
        let layout = rasterize(&read_layout(&data.layout_path(e))?, raster)?;
        stats.layouts_read += 1;
        let graph = if variant.uses_graph() {
            stats.netlists_read += 1;
            Some(build_graph(&e.cell_type, &read_netlist(&data.netlist_path(e))?)?.input())
        } else {
            None
        };
        out.push(Sample {
            id: e.id.clone(),
            cell_type: e.cell_type.clone(),
            input: ModelInput { layout, graph },
            target: e.labels.to_array(),
        });
    }
    Ok((out, stats))
}
