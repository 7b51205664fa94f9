#![allow(dead_code)]

pub mod layouts;
pub mod oracles;
pub mod reference;

use fusioncell::fusion::{FusionModel, ModelConfig, ModelInput, Variant};
use fusioncell::geometry::{LayoutTensor, RasterConfig};
use fusioncell::netlist::{
    build_graph, parse_netlist, pin_role, CellGraph, Device, DeviceKind, ParsedNetlist, Pin,
};
use rand::Rng;

pub fn fixture_graph(name: &str) -> CellGraph {
    let path = format!("{}/fixtures/{name}.sp", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(path).unwrap();
    build_graph(name, &parse_netlist(&text).unwrap()).unwrap()
}

const NETS: [&str; 9] = ["VDD", "VSS", "A", "B", "C", "Y", "n1", "n2", "n3"];

pub fn random_netlist<R: Rng>(rng: &mut R, max_devices: usize) -> ParsedNetlist {
    let count = rng.random_range(1..=max_devices);
    let devices = (0..count)
        .map(|i| Device {
            name: format!("M{i}"),
            kind: if rng.random_bool(0.5) {
                DeviceKind::Nmos
            } else {
                DeviceKind::Pmos
            },
            width_nm: 40.0 * rng.random_range(1..6) as f64,
            length_nm: 20.0,
            terminals: std::array::from_fn(|_| NETS[rng.random_range(0..NETS.len())].to_string()),
        })
        .collect();
    let pins = ["A", "B", "C", "Y", "VDD", "VSS"]
        .iter()
        .map(|p| Pin {
            name: p.to_string(),
            role: pin_role(p),
        })
        .collect();
    ParsedNetlist {
        subckt: "RAND".into(),
        pins,
        devices,
    }
}

pub fn random_graph<R: Rng>(rng: &mut R, max_devices: usize) -> CellGraph {
    build_graph("RAND", &random_netlist(rng, max_devices)).unwrap()
}

/// Sparse layout image with net-like values in (0, 1].
pub fn random_layout<R: Rng>(rng: &mut R, height: usize, width: usize) -> LayoutTensor {
    let mut t = LayoutTensor::zeros("rand", height, width);
    for v in &mut t.data {
        if rng.random_bool(0.3) {
            *v = rng.random_range(1..=8) as f64 / 9.0;
        }
    }
    t
}

pub fn tiny_raster() -> RasterConfig {
    RasterConfig {
        height: 16,
        width: 16,
        patch_size: 8,
        ..RasterConfig::default()
    }
}

pub fn tiny_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        d: 8,
        heads: 2,
        layout_layers: 1,
        graph_layers: 2,
        ffn_mult: 2,
        ..ModelConfig::default()
    }
}

pub fn tiny_model(variant: Variant, seed: u64) -> FusionModel {
    FusionModel::new(tiny_config(variant), tiny_raster(), seed).unwrap()
}

pub fn input<R: Rng>(rng: &mut R, raster: &RasterConfig, graph: &CellGraph) -> ModelInput {
    ModelInput {
        layout: random_layout(rng, raster.height, raster.width),
        graph: Some(graph.input()),
    }
}

/// Adds noise to every parameter so zero-initialized biases matter.
pub fn perturb_params<R: Rng>(model: &mut FusionModel, rng: &mut R, scale: f64) {
    let ids: Vec<_> = model.store.ids().collect();
    for id in ids {
        for v in model.store.get_mut(id).data_mut() {
            *v += rng.random_range(-scale..scale);
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
