//! Seeded routed layouts on a fixed three-layer template.
//!
//! Rows from the bottom: VSS rail, N diffusion contacts, N gate contacts,
//! eight M2 routing tracks, P gate contacts, P diffusion contacts, VDD
//! rail. Every multi-pin signal net owns one track; its pins reach it
//! through M1 verticals. The output net may own extra tracks joined to its
//! main track by M1 jogs right of the last column.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Family, SynthConfig};
use crate::error::{Error, Result};
use crate::geometry::{Layer, LayoutDesign, Rect, Via};

pub const MAX_WIRE_WIDTH_NM: f64 = 20.0;

const X0: f64 = 60.0;
const COLUMN_PITCH: f64 = 80.0;
/// N-row verticals sit left of the column center, P-row verticals right.
const VERTICAL_OFFSET: f64 = 20.0;
const TRACKS: usize = 8;
const TRACK_Y0: f64 = 150.0;
const TRACK_PITCH: f64 = 40.0;
const MAX_EXTRA_TRACKS: usize = 3;
const JOG_PITCH: f64 = 40.0;
const MIN_CELL_WIDTH: f64 = 640.0;
const CELL_HEIGHT: f64 = 580.0;

const RAIL_HEIGHT: f64 = 30.0;
const N_DIFF_Y: f64 = 70.0;
const N_GATE_Y: f64 = 110.0;
const P_GATE_Y: f64 = 470.0;
const P_DIFF_Y: f64 = 510.0;
const DIFF_PAD_HALF_W: f64 = 30.0;
const DIFF_PAD_HALF_H: f64 = 20.0;
const GATE_PAD_HALF_H: f64 = 10.0;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Row {
    N,
    P,
}

fn column_x(c: usize) -> f64 {
    X0 + COLUMN_PITCH * c as f64
}

fn track_y(t: usize) -> f64 {
    TRACK_Y0 + TRACK_PITCH * t as f64
}

pub fn cell_width(family: Family) -> f64 {
    let last = column_x(family.rows().0.len() - 1);
    MIN_CELL_WIDTH.max(last + COLUMN_PITCH + JOG_PITCH * (MAX_EXTRA_TRACKS - 1) as f64 + 60.0)
}

pub fn cell_height() -> f64 {
    CELL_HEIGHT
}

/// Random multiple of 10 in `[lo, hi]` (or `lo` when the range is empty).
fn grid_value(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) / 10.0).floor();
    if steps < 1.0 {
        return lo;
    }
    lo + 10.0 * rng.random_range(0..=steps as u64) as f64
}

struct Builder {
    nets: Vec<String>,
    rects: Vec<Rect>,
    vias: Vec<Via>,
    hw: f64,
}

impl Builder {
    fn net(&self, name: &str) -> usize {
        self.nets
            .iter()
            .position(|n| n == name)
            .expect("net is in the family order")
    }

    fn rect(&mut self, layer: Layer, x0: f64, y0: f64, x1: f64, y1: f64, net: usize) {
        self.rects.push(Rect::new(layer, x0, y0, x1, y1, net));
    }

    fn via(&mut self, lower_layer: Layer, cx: f64, cy: f64, net: usize) {
        self.vias.push(Via {
            lower_layer,
            cx,
            cy,
            size: 2.0 * self.hw,
            net,
        });
    }

    /// Vertical wire between two heights on `layer`.
    fn vertical(&mut self, layer: Layer, x: f64, ya: f64, yb: f64, net: usize) {
        let hw = self.hw;
        self.rect(layer, x - hw, ya.min(yb) - hw, x + hw, ya.max(yb) + hw, net);
    }

    fn horizontal(&mut self, layer: Layer, xa: f64, xb: f64, y: f64, net: usize) {
        let hw = self.hw;
        self.rect(layer, xa.min(xb) - hw, y - hw, xa.max(xb) + hw, y + hw, net);
    }
}

/// Routes one variant of `family`. The geometry depends only on
/// `variant_seed`, so all drives of a variant share it.
pub fn generate_layout(
    family: Family,
    variant_seed: u64,
    cell_name: &str,
    cfg: &SynthConfig,
) -> Result<LayoutDesign> {
    let width = cell_width(family);
    let height = cell_height();
    if width > cfg.canvas_nm || height > cfg.canvas_nm {
        return Err(Error::Synth(format!(
            "{cell_name}: {width}x{height} nm cell does not fit the {} nm routing canvas",
            cfg.canvas_nm
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(variant_seed);
    let mut b = Builder {
        nets: family.net_order(),
        rects: Vec::new(),
        vias: Vec::new(),
        hw: cfg.wire_width_nm / 2.0,
    };
    let (vdd, vss) = (b.net("VDD"), b.net("VSS"));
    b.rect(Layer::M0, 0.0, 0.0, width, RAIL_HEIGHT, vss);
    b.rect(Layer::M0, 0.0, height - RAIL_HEIGHT, width, height, vdd);

    // Pins: (net, row, column, is_gate).
    let (n_row, p_row) = family.rows();
    let pins: Vec<(usize, Row, usize, bool)> = n_row
        .iter()
        .enumerate()
        .map(|(c, n)| (b.net(n), Row::N, c, c % 2 == 1))
        .chain(
            p_row
                .iter()
                .enumerate()
                .map(|(c, n)| (b.net(n), Row::P, c, c % 2 == 1)),
        )
        .collect();
    let pin_count = |net: usize| pins.iter().filter(|p| p.0 == net).count();
    let routed: Vec<usize> = (0..b.nets.len())
        .filter(|&n| n != vdd && n != vss && pin_count(n) >= 2)
        .collect();
    let y_net = b.net("Y");

    let mut tracks: Vec<usize> = (0..TRACKS).collect();
    tracks.shuffle(&mut rng);
    let free = TRACKS - routed.len();
    let extra = rng.random_range(0..=MAX_EXTRA_TRACKS.min(free));
    let track_of = |net: usize| tracks[routed.iter().position(|&r| r == net).expect("routed net")];

    // Pads, supply straps and pin verticals.
    let mut vertical_x: Vec<Vec<f64>> = vec![Vec::new(); b.nets.len()];
    for &(net, row, c, gate) in &pins {
        let x = column_x(c);
        let (pad_y, xv) = match (row, gate) {
            (Row::N, false) => (N_DIFF_Y, x - VERTICAL_OFFSET),
            (Row::N, true) => (N_GATE_Y, x - VERTICAL_OFFSET),
            (Row::P, false) => (P_DIFF_Y, x + VERTICAL_OFFSET),
            (Row::P, true) => (P_GATE_Y, x + VERTICAL_OFFSET),
        };
        if gate {
            let (x0, x1) = if row == Row::N {
                (x - 30.0, x + 10.0)
            } else {
                (x - 10.0, x + 30.0)
            };
            b.rect(
                Layer::M0,
                x0,
                pad_y - GATE_PAD_HALF_H,
                x1,
                pad_y + GATE_PAD_HALF_H,
                net,
            );
        } else {
            b.rect(
                Layer::M0,
                x - DIFF_PAD_HALF_W,
                pad_y - DIFF_PAD_HALF_H,
                x + DIFF_PAD_HALF_W,
                pad_y + DIFF_PAD_HALF_H,
                net,
            );
        }
        if net == vss {
            b.rect(
                Layer::M0,
                x - 10.0,
                RAIL_HEIGHT,
                x + 10.0,
                pad_y - DIFF_PAD_HALF_H,
                net,
            );
        } else if net == vdd {
            b.rect(
                Layer::M0,
                x - 10.0,
                pad_y + DIFF_PAD_HALF_H,
                x + 10.0,
                height - RAIL_HEIGHT,
                net,
            );
        } else if routed.contains(&net) {
            let ty = track_y(track_of(net));
            b.via(Layer::M0, xv, pad_y, net);
            b.vertical(Layer::M1, xv, pad_y, ty, net);
            b.via(Layer::M1, xv, ty, net);
            vertical_x[net].push(xv);
        }
    }

    // Main tracks with random extensions; the output net also reaches its jogs.
    let last_x = column_x(n_row.len() - 1);
    let jog_x: Vec<f64> = (0..extra)
        .map(|j| last_x + COLUMN_PITCH + JOG_PITCH * j as f64)
        .collect();
    let margin = 10.0 + b.hw;
    for &net in &routed {
        let xs = &vertical_x[net];
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if net == y_net {
            hi = jog_x.iter().cloned().fold(hi, f64::max);
        }
        let left = grid_value(&mut rng, margin, lo);
        let right = grid_value(&mut rng, hi, width - margin);
        b.horizontal(Layer::M2, left, right, track_y(track_of(net)), net);
    }

    // Output-net detours on otherwise unused tracks.
    let main_y = track_y(track_of(y_net));
    for (j, &jx) in jog_x.iter().enumerate() {
        let ty = track_y(tracks[routed.len() + j]);
        let start = grid_value(&mut rng, margin, jx - 60.0);
        b.vertical(Layer::M1, jx, main_y, ty, y_net);
        b.via(Layer::M1, jx, main_y, y_net);
        b.via(Layer::M1, jx, ty, y_net);
        b.horizontal(Layer::M2, start, jx, ty, y_net);
    }

    let design = LayoutDesign {
        cell_name: cell_name.to_string(),
        width,
        height,
        rects: b.rects,
        vias: b.vias,
        net_names: b.nets,
    };
    design.validate()?;
    Ok(design)
}
