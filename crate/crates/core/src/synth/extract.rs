//! Per-net wire resistance and capacitance from layout rectangles.

use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::geometry::{LayoutDesign, Rect};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcNet {
    pub net: String,
    pub resistance_ohm: f64,
    pub ground_cap_ff: f64,
    /// `(neighbour net, coupling fF)`, in net-index order.
    pub coupling_ff: Vec<(String, f64)>,
}

impl RcNet {
    pub fn total_coupling_ff(&self) -> f64 {
        self.coupling_ff.iter().map(|(_, c)| c).sum()
    }

    /// Ground plus coupling, with coupling counted once (Miller factor 1).
    pub fn total_cap_ff(&self) -> f64 {
        self.ground_cap_ff + self.total_coupling_ff()
    }
}

/// Overlap length and spacing of two parallel same-layer rectangles, if
/// they face each other across a gap.
fn facing(a: &Rect, b: &Rect) -> Option<(f64, f64)> {
    let x_overlap = a.x1.min(b.x1) - a.x0.max(b.x0);
    let y_overlap = a.y1.min(b.y1) - a.y0.max(b.y0);
    let x_gap = (b.x0 - a.x1).max(a.x0 - b.x1);
    let y_gap = (b.y0 - a.y1).max(a.y0 - b.y1);
    if x_overlap > 0.0 && y_gap > 0.0 {
        Some((x_overlap, y_gap))
    } else if y_overlap > 0.0 && x_gap > 0.0 {
        Some((y_overlap, x_gap))
    } else {
        None
    }
}

/// One entry per net of `design`, in net-index order. Vias carry no R or C.
pub fn extract_rc(design: &LayoutDesign, cfg: &SynthConfig) -> Vec<RcNet> {
    let n = design.num_nets();
    let mut res = vec![0.0; n];
    let mut ground_af = vec![0.0; n];
    let mut couple_af = vec![vec![0.0; n]; n];
    for r in &design.rects {
        res[r.net] += cfg.sheet_res_ohm_sq * r.squares();
        ground_af[r.net] +=
            cfg.area_cap_af_per_nm2 * r.area() + cfg.fringe_cap_af_per_nm * r.perimeter();
    }
    for (i, a) in design.rects.iter().enumerate() {
        for b in &design.rects[i + 1..] {
            if a.layer != b.layer || a.net == b.net {
                continue;
            }
            if let Some((overlap, spacing)) = facing(a, b) {
                if spacing <= cfg.coupling_max_spacing_nm {
                    let c = cfg.coupling_cap_af * overlap / spacing;
                    couple_af[a.net][b.net] += c;
                    couple_af[b.net][a.net] += c;
                }
            }
        }
    }
    (0..n)
        .map(|i| RcNet {
            net: design.net_names[i].clone(),
            resistance_ohm: res[i],
            ground_cap_ff: ground_af[i] * 1e-3,
            coupling_ff: (0..n)
                .filter(|&j| couple_af[i][j] > 0.0)
                .map(|j| (design.net_names[j].clone(), couple_af[i][j] * 1e-3))
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Layer;

    fn design(rects: Vec<Rect>) -> LayoutDesign {
        LayoutDesign {
            cell_name: "t".into(),
            width: 1000.0,
            height: 1000.0,
            rects,
            vias: vec![],
            net_names: vec!["A".into(), "B".into()],
        }
    }

    #[test]
    fn single_wire_resistance() {
        let cfg = SynthConfig {
            sheet_res_ohm_sq: 10.0,
            ..SynthConfig::default()
        };
        let rc = extract_rc(
            &design(vec![Rect::new(Layer::M1, 0.0, 0.0, 100.0, 20.0, 0)]),
            &cfg,
        );
        assert!((rc[0].resistance_ohm - 50.0).abs() < 1e-12);
        assert!(rc[0].coupling_ff.is_empty());
        assert_eq!(rc[1].resistance_ohm, 0.0);
    }

    #[test]
    fn ground_cap_formula() {
        let cfg = SynthConfig {
            area_cap_af_per_nm2: 0.01,
            fringe_cap_af_per_nm: 0.04,
            ..SynthConfig::default()
        };
        let rc = extract_rc(
            &design(vec![Rect::new(Layer::M2, 0.0, 0.0, 100.0, 20.0, 0)]),
            &cfg,
        );
        let want = (0.01 * 2000.0 + 0.04 * 240.0) * 1e-3;
        assert!((rc[0].ground_cap_ff - want).abs() < 1e-15);
    }

    #[test]
    fn parallel_wires_couple_symmetrically() {
        let cfg = SynthConfig {
            coupling_cap_af: 2.0,
            ..SynthConfig::default()
        };
        let d = design(vec![
            Rect::new(Layer::M2, 0.0, 0.0, 100.0, 20.0, 0),
            Rect::new(Layer::M2, 40.0, 40.0, 300.0, 60.0, 1),
            Rect::new(Layer::M1, 0.0, 30.0, 100.0, 35.0, 1),
        ]);
        let rc = extract_rc(&d, &cfg);
        // 60 nm of overlap across a 20 nm gap; the M1 wire does not couple.
        let want = 2.0 * 60.0 / 20.0 * 1e-3;
        assert_eq!(rc[0].coupling_ff, vec![("B".to_string(), want)]);
        assert_eq!(rc[1].coupling_ff, vec![("A".to_string(), want)]);
    }

    #[test]
    fn far_or_diagonal_wires_do_not_couple() {
        let cfg = SynthConfig::default();
        let d = design(vec![
            Rect::new(Layer::M2, 0.0, 0.0, 100.0, 20.0, 0),
            Rect::new(Layer::M2, 0.0, 500.0, 100.0, 520.0, 1),
            Rect::new(Layer::M2, 150.0, 30.0, 200.0, 50.0, 1),
        ]);
        assert!(extract_rc(&d, &cfg)[0].coupling_ff.is_empty());
    }
}
