//! Shared inputs for the benchmarks.

use fusioncell::fusion::ModelInput;
use fusioncell::geometry::{rasterize, RasterConfig};
use fusioncell::netlist::{build_graph, parse_netlist};
use fusioncell::synth::{generate_cell, label_generated, Family, SynthConfig};
use fusioncell::trainer::Sample;

/// A batch of generated cells, one per family and variant.
pub fn sample_batch(size: usize, raster: &RasterConfig) -> Vec<Sample> {
    let cfg = SynthConfig::default();
    (0..size)
        .map(|i| {
            let family = Family::ALL[i % Family::ALL.len()];
            let cell = generate_cell(family, 1, i / Family::ALL.len(), &cfg).expect("generates");
            let labels = label_generated(&cell, &cfg).expect("labels");
            let graph = build_graph(
                &cell.cell_type,
                &parse_netlist(&cell.netlist).expect("parses"),
            )
            .expect("graph");
            Sample {
                id: cell.id,
                cell_type: cell.cell_type,
                input: ModelInput {
                    layout: rasterize(&cell.design, raster).expect("rasterizes"),
                    graph: Some(graph.input()),
                },
                target: labels.to_array(),
            }
        })
        .collect()
}
