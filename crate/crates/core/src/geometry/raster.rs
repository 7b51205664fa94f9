use super::{normalize_net_id, Layer, LayoutDesign, LayoutTensor, RasterConfig, Rect, Via};
use crate::error::{Error, Result};

/// Affine map from design nanometers to canvas pixel coordinates, after
/// long-edge alignment.
#[derive(Clone, Copy, Debug)]
struct CanvasMap {
    rotate: bool,
    design_height: f64,
    scale: f64,
    off_x: f64,
    off_y: f64,
}

impl CanvasMap {
    fn new(design: &LayoutDesign, cfg: &RasterConfig) -> Self {
        let rotate = design.height > design.width;
        let (w, h) = if rotate {
            (design.height, design.width)
        } else {
            (design.width, design.height)
        };
        let scale = (cfg.width as f64 / w).min(cfg.height as f64 / h);
        Self {
            rotate,
            design_height: design.height,
            scale,
            off_x: (cfg.width as f64 - w * scale) / 2.0,
            off_y: (cfg.height as f64 - h * scale) / 2.0,
        }
    }

    /// Design point to canvas `(x, y)`; `x` runs along columns, `y` along rows.
    fn point(&self, x: f64, y: f64) -> (f64, f64) {
        let (x, y) = if self.rotate {
            (self.design_height - y, x)
        } else {
            (x, y)
        };
        (self.off_x + x * self.scale, self.off_y + y * self.scale)
    }

    fn rect(&self, r: &Rect) -> [f64; 4] {
        let (ax, ay) = self.point(r.x0, r.y0);
        let (bx, by) = self.point(r.x1, r.y1);
        [ax.min(bx), ay.min(by), ax.max(bx), ay.max(by)]
    }
}

/// Pixel indices `i` in `[0, n)` whose centers `i + 0.5` lie in `[lo, hi)`.
fn covered_span(lo: f64, hi: f64, n: usize) -> std::ops::Range<usize> {
    // Smallest i in [0, n] with i + 0.5 >= v; centers are monotone in i.
    let first_at_least = |v: f64| {
        let mut i = (v - 0.5).ceil().clamp(0.0, n as f64) as usize;
        while i > 0 && (i - 1) as f64 + 0.5 >= v {
            i -= 1;
        }
        while i < n && (i as f64 + 0.5) < v {
            i += 1;
        }
        i
    };
    let a = first_at_least(lo);
    a..first_at_least(hi).max(a)
}

/// Per-channel owner grid: `None` is background, `Some(net)` is occupied.
struct OwnerGrid {
    height: usize,
    width: usize,
    cells: Vec<Option<usize>>,
}

impl OwnerGrid {
    fn new(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            cells: vec![None; 3 * height * width],
        }
    }

    fn idx(&self, ch: usize, r: usize, c: usize) -> usize {
        (ch * self.height + r) * self.width + c
    }

    fn claim(
        &mut self,
        ch: usize,
        r: usize,
        c: usize,
        net: usize,
        design: &LayoutDesign,
    ) -> Result<()> {
        let i = self.idx(ch, r, c);
        match self.cells[i] {
            Some(other) if other != net => Err(Error::Geometry(format!(
                "{}: nets {} and {} overlap on {:?} at pixel ({r}, {c})",
                design.cell_name,
                design.net_names[other],
                design.net_names[net],
                Layer::ALL[ch]
            ))),
            _ => {
                self.cells[i] = Some(net);
                Ok(())
            }
        }
    }

    /// Grows every occupied pixel in `seeds` by a Chebyshev `radius` into
    /// background pixels of channel `ch`. Competing nets resolve to the
    /// lowest net ID; occupied pixels never change.
    fn grow(&mut self, ch: usize, seeds: &[(usize, usize, usize)], radius: usize) {
        if radius == 0 {
            return;
        }
        let mut claims: Vec<Option<usize>> = vec![None; self.height * self.width];
        for &(r, c, net) in seeds {
            let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(self.height - 1));
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(self.width - 1));
            for rr in r0..=r1 {
                for cc in c0..=c1 {
                    if self.cells[self.idx(ch, rr, cc)].is_none() {
                        let slot = &mut claims[rr * self.width + cc];
                        *slot = Some(slot.map_or(net, |n| n.min(net)));
                    }
                }
            }
        }
        for (p, claim) in claims.into_iter().enumerate() {
            if let Some(net) = claim {
                let i = ch * self.height * self.width + p;
                self.cells[i] = Some(net);
            }
        }
    }

    fn occupied(&self, ch: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.height {
            for c in 0..self.width {
                if let Some(n) = self.cells[self.idx(ch, r, c)] {
                    out.push((r, c, n));
                }
            }
        }
        out
    }
}

fn via_footprint(map: &CanvasMap, via: &Via, cfg: &RasterConfig) -> Vec<(usize, usize)> {
    let half = via.size / 2.0;
    let (ax, ay) = map.point(via.cx - half, via.cy - half);
    let (bx, by) = map.point(via.cx + half, via.cy + half);
    let cols = covered_span(ax.min(bx), ax.max(bx), cfg.width);
    let rows = covered_span(ay.min(by), ay.max(by), cfg.height);
    let mut px: Vec<(usize, usize)> = rows
        .flat_map(|r| cols.clone().map(move |c| (r, c)))
        .collect();
    let (cx, cy) = map.point(via.cx, via.cy);
    let center = (
        (cy.floor().max(0.0) as usize).min(cfg.height - 1),
        (cx.floor().max(0.0) as usize).min(cfg.width - 1),
    );
    if !px.contains(&center) {
        px.push(center);
    }
    px
}

/// Rasterizes `design` onto the configured canvas.
///
/// Portrait designs are turned a quarter so the long edge is horizontal,
/// then the design is scaled uniformly to fit and centered. A pixel
/// belongs to a rectangle when its center lies inside it. Vias stamp
/// their footprint into both adjacent layers and spill by
/// `via_spill_radius`; finally each channel is dilated by
/// `dilation_radius`. Spill and dilation only fill background.
pub fn rasterize(design: &LayoutDesign, cfg: &RasterConfig) -> Result<LayoutTensor> {
    design.validate()?;
    cfg.validate()?;
    let map = CanvasMap::new(design, cfg);
    let mut grid = OwnerGrid::new(cfg.height, cfg.width);

    for rect in &design.rects {
        let [x0, y0, x1, y1] = map.rect(rect);
        let ch = rect.layer.channel();
        for r in covered_span(y0, y1, cfg.height) {
            for c in covered_span(x0, x1, cfg.width) {
                grid.claim(ch, r, c, rect.net, design)?;
            }
        }
    }

    let mut spill_seeds: [Vec<(usize, usize, usize)>; 3] = Default::default();
    for via in &design.vias {
        let lower = via.lower_layer;
        let upper = lower.upper().expect("validated");
        for (r, c) in via_footprint(&map, via, cfg) {
            for layer in [lower, upper] {
                grid.claim(layer.channel(), r, c, via.net, design)?;
                spill_seeds[layer.channel()].push((r, c, via.net));
            }
        }
    }
    for (ch, seeds) in spill_seeds.iter().enumerate() {
        grid.grow(ch, seeds, cfg.via_spill_radius);
    }
    for ch in 0..3 {
        let seeds = grid.occupied(ch);
        grid.grow(ch, &seeds, cfg.dilation_radius);
    }

    let values: Vec<f64> = (0..design.num_nets())
        .map(|n| normalize_net_id(n, design.num_nets(), cfg.netid_scheme, &design.net_names[n]))
        .collect::<Result<_>>()?;
    let mut out = LayoutTensor::zeros(design.cell_name.clone(), cfg.height, cfg.width);
    for (v, owner) in out.data.iter_mut().zip(&grid.cells) {
        if let Some(n) = owner {
            *v = values[*n];
        }
    }
    Ok(out)
}

/// Patch vectors as a row-major `P × (3·p²)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMatrix {
    pub rows: usize,
    pub cols: usize,
    pub patch_size: usize,
    pub grid_height: usize,
    pub grid_width: usize,
    pub data: Vec<f64>,
}

/// Splits the tensor into non-overlapping `p × p` patches.
///
/// Patches are ordered row-major over the patch grid; each vector is laid
/// out channel-major, then row, then column within the patch.
pub fn patchify(t: &LayoutTensor, patch_size: usize) -> Result<PatchMatrix> {
    let p = patch_size;
    if p == 0 || !t.height.is_multiple_of(p) || !t.width.is_multiple_of(p) {
        return Err(Error::Geometry(format!(
            "tensor {}x{} is not divisible by patch size {p}",
            t.height, t.width
        )));
    }
    let (gh, gw) = (t.height / p, t.width / p);
    let cols = 3 * p * p;
    let mut data = Vec::with_capacity(gh * gw * cols);
    for pr in 0..gh {
        for pc in 0..gw {
            for ch in 0..3 {
                for i in 0..p {
                    let start = (ch * t.height + pr * p + i) * t.width + pc * p;
                    data.extend_from_slice(&t.data[start..start + p]);
                }
            }
        }
    }
    Ok(PatchMatrix {
        rows: gh * gw,
        cols,
        patch_size: p,
        grid_height: gh,
        grid_width: gw,
        data,
    })
}

/// Inverse of [`patchify`].
pub fn unpatchify(m: &PatchMatrix, cell_name: &str) -> LayoutTensor {
    let p = m.patch_size;
    let (h, w) = (m.grid_height * p, m.grid_width * p);
    let mut t = LayoutTensor::zeros(cell_name, h, w);
    let mut src = m.data.chunks(p);
    for pr in 0..m.grid_height {
        for pc in 0..m.grid_width {
            for ch in 0..3 {
                for i in 0..p {
                    let start = (ch * h + pr * p + i) * w + pc * p;
                    t.data[start..start + p].copy_from_slice(src.next().expect("sized"));
                }
            }
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NetIdScheme, Via};

    fn cfg(n: usize) -> RasterConfig {
        RasterConfig {
            height: n,
            width: n,
            patch_size: n.min(8),
            via_spill_radius: 1,
            dilation_radius: 1,
            netid_scheme: NetIdScheme::IndexFraction,
        }
    }

    fn design(rects: Vec<Rect>, vias: Vec<Via>, nets: usize) -> LayoutDesign {
        LayoutDesign {
            cell_name: "t".into(),
            width: 100.0,
            height: 100.0,
            rects,
            vias,
            net_names: (0..nets).map(|i| format!("n{i}")).collect(),
        }
    }

    #[test]
    fn empty_design_is_all_zero() {
        let t = rasterize(&design(vec![], vec![], 1), &cfg(16)).unwrap();
        assert!(t.data.iter().all(|&v| v == 0.0));
        assert_eq!(t.data.len(), 3 * 16 * 16);
    }

    #[test]
    fn full_coverage_rect_fills_one_channel() {
        let d = design(
            vec![Rect::new(Layer::M1, 0.0, 0.0, 100.0, 100.0, 0)],
            vec![],
            1,
        );
        let t = rasterize(&d, &cfg(16)).unwrap();
        assert!(t.channel(1).iter().all(|&v| v == 0.5));
        assert!(t.channel(0).iter().all(|&v| v == 0.0));
        assert!(t.channel(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_different_nets_is_an_error() {
        let d = design(
            vec![
                Rect::new(Layer::M0, 0.0, 0.0, 50.0, 50.0, 0),
                Rect::new(Layer::M0, 40.0, 40.0, 60.0, 60.0, 1),
            ],
            vec![],
            2,
        );
        assert!(rasterize(&d, &cfg(16)).is_err());
        // Same net overlapping is a union.
        let mut ok = d.clone();
        ok.rects[1].net = 0;
        assert!(rasterize(&ok, &cfg(16)).is_ok());
        // Different layers never conflict.
        let mut other_layer = d;
        other_layer.rects[1].layer = Layer::M2;
        assert!(rasterize(&other_layer, &cfg(16)).is_ok());
    }

    #[test]
    fn dilation_does_not_overwrite_neighbours() {
        let mut c = cfg(16);
        c.dilation_radius = 2;
        let d = design(
            vec![
                Rect::new(Layer::M0, 0.0, 0.0, 30.0, 100.0, 0),
                Rect::new(Layer::M0, 50.0, 0.0, 100.0, 100.0, 1),
            ],
            vec![],
            2,
        );
        let undilated = rasterize(
            &d,
            &RasterConfig {
                dilation_radius: 0,
                ..c.clone()
            },
        )
        .unwrap();
        let t = rasterize(&d, &c).unwrap();
        for (a, b) in undilated.data.iter().zip(&t.data) {
            if *a != 0.0 {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn via_lands_on_two_channels() {
        let mut c = cfg(16);
        c.dilation_radius = 0;
        let d = design(
            vec![],
            vec![Via {
                lower_layer: Layer::M1,
                cx: 50.0,
                cy: 50.0,
                size: 10.0,
                net: 0,
            }],
            1,
        );
        let t = rasterize(&d, &c).unwrap();
        let nz = |ch| t.channel(ch).iter().filter(|&&v| v > 0.0).count();
        assert_eq!(nz(0), 0);
        assert!(nz(1) > 0);
        assert_eq!(nz(1), nz(2));
    }

    #[test]
    fn portrait_design_is_rotated() {
        let mut d = design(
            vec![Rect::new(Layer::M2, 0.0, 0.0, 20.0, 200.0, 0)],
            vec![],
            1,
        );
        d.height = 200.0;
        d.width = 20.0;
        let mut c = cfg(16);
        c.dilation_radius = 0;
        let t = rasterize(&d, &c).unwrap();
        // The tall thin wire becomes a full-width horizontal strip.
        let ch = t.channel(2);
        let occupied_rows: Vec<usize> = (0..16)
            .filter(|&r| ch[r * 16..(r + 1) * 16].iter().any(|&v| v > 0.0))
            .collect();
        assert!(occupied_rows.len() <= 3);
        let r = occupied_rows[0];
        assert!(ch[r * 16..(r + 1) * 16].iter().all(|&v| v > 0.0));
    }

    #[test]
    fn span_matches_center_predicate() {
        for &(lo, hi) in &[
            (0.0, 16.0),
            (0.49, 0.51),
            (0.5, 1.5),
            (3.2, 3.7),
            (2.5, 2.5),
            (-1.0, 40.0),
            (15.4, 16.0),
        ] {
            let got: Vec<usize> = covered_span(lo, hi, 16).collect();
            let want: Vec<usize> = (0..16)
                .filter(|&i| (i as f64 + 0.5) >= lo && (i as f64 + 0.5) < hi)
                .collect();
            assert_eq!(got, want, "span [{lo}, {hi})");
        }
    }

    #[test]
    fn patch_shapes() {
        let t = LayoutTensor::zeros("t", 224, 224);
        let m = patchify(&t, 16).unwrap();
        assert_eq!((m.rows, m.cols), (196, 768));
        assert!(patchify(&LayoutTensor::zeros("t", 30, 32), 16).is_err());
    }

    #[test]
    fn single_patch_is_the_flattened_tensor() {
        let mut t = LayoutTensor::zeros("t", 32, 32);
        t.data
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = i as f64);
        let m = patchify(&t, 32).unwrap();
        assert_eq!(m.rows, 1);
        assert_eq!(m.data, t.data);
    }
}
