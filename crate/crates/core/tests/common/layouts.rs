//! Random layouts and a per-pixel reference rasterizer.

use fusioncell::geometry::{Layer, LayoutDesign, RasterConfig, Rect, Via};
use rand::Rng;

/// Per-pixel reference rasterizer: every pixel center is tested against
/// every shape.
pub fn brute_force_raster(d: &LayoutDesign, cfg: &RasterConfig) -> Option<Vec<f64>> {
    let (h, w) = (cfg.height, cfg.width);
    let rotate = d.height > d.width;
    let (dw, dh) = if rotate {
        (d.height, d.width)
    } else {
        (d.width, d.height)
    };
    let scale = f64::min(w as f64 / dw, h as f64 / dh);
    let (ox, oy) = ((w as f64 - dw * scale) / 2.0, (h as f64 - dh * scale) / 2.0);
    let to_canvas = |x: f64, y: f64| {
        let (x, y) = if rotate { (d.height - y, x) } else { (x, y) };
        (ox + x * scale, oy + y * scale)
    };
    let inside = |x0: f64, y0: f64, x1: f64, y1: f64, r: usize, c: usize| {
        let (a, b) = to_canvas(x0, y0);
        let (e, f) = to_canvas(x1, y1);
        let (cx, cy) = (c as f64 + 0.5, r as f64 + 0.5);
        cx >= a.min(e) && cx < a.max(e) && cy >= b.min(f) && cy < b.max(f)
    };
    let mut owner: Vec<Option<usize>> = vec![None; 3 * h * w];
    let at = |ch: usize, r: usize, c: usize| (ch * h + r) * w + c;
    let set = |owner: &mut Vec<Option<usize>>, i: usize, net: usize| -> bool {
        match owner[i] {
            Some(o) if o != net => false,
            _ => {
                owner[i] = Some(net);
                true
            }
        }
    };
    for rect in &d.rects {
        for r in 0..h {
            for c in 0..w {
                if inside(rect.x0, rect.y0, rect.x1, rect.y1, r, c)
                    && !set(&mut owner, at(rect.layer as usize, r, c), rect.net)
                {
                    return None;
                }
            }
        }
    }
    let mut via_px: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); 3];
    for v in &d.vias {
        let s = v.size / 2.0;
        let (cx, cy) = to_canvas(v.cx, v.cy);
        let center = (
            (cy.floor() as usize).min(h - 1),
            (cx.floor() as usize).min(w - 1),
        );
        for r in 0..h {
            for c in 0..w {
                if inside(v.cx - s, v.cy - s, v.cx + s, v.cy + s, r, c) || (r, c) == center {
                    for ch in [v.lower_layer as usize, v.lower_layer as usize + 1] {
                        if !set(&mut owner, at(ch, r, c), v.net) {
                            return None;
                        }
                        via_px[ch].push((r, c, v.net));
                    }
                }
            }
        }
    }
    let grow =
        |owner: &mut Vec<Option<usize>>, ch: usize, seeds: &[(usize, usize, usize)], k: usize| {
            let mut next = owner.clone();
            for r in 0..h {
                for c in 0..w {
                    if owner[at(ch, r, c)].is_some() {
                        continue;
                    }
                    next[at(ch, r, c)] = seeds
                        .iter()
                        .filter(|&&(sr, sc, _)| sr.abs_diff(r) <= k && sc.abs_diff(c) <= k)
                        .map(|s| s.2)
                        .min();
                }
            }
            *owner = next;
        };
    for ch in 0..3 {
        grow(&mut owner, ch, &via_px[ch], cfg.via_spill_radius);
    }
    for ch in 0..3 {
        let seeds: Vec<_> = (0..h * w)
            .filter_map(|p| owner[ch * h * w + p].map(|n| (p / w, p % w, n)))
            .collect();
        grow(&mut owner, ch, &seeds, cfg.dilation_radius);
    }
    let n = d.net_names.len() as f64;
    Some(
        owner
            .iter()
            .map(|o| o.map_or(0.0, |i| (i as f64 + 1.0) / (n + 1.0)))
            .collect(),
    )
}

pub fn random_design<R: Rng>(rng: &mut R) -> LayoutDesign {
    // Power-of-two sizes keep every mapped coordinate exact.
    let sizes = [32.0, 64.0, 128.0];
    let (w, h) = (sizes[rng.random_range(0..3)], sizes[rng.random_range(0..3)]);
    let nets = rng.random_range(1..=4);
    let rects = (0..rng.random_range(0..=5))
        .map(|_| {
            let x0 = rng.random_range(0..w as i32 - 1) as f64;
            let y0 = rng.random_range(0..h as i32 - 1) as f64;
            let x1 = rng.random_range(x0 as i32 + 1..=w as i32) as f64;
            let y1 = rng.random_range(y0 as i32 + 1..=h as i32) as f64;
            Rect::new(
                Layer::ALL[rng.random_range(0..3)],
                x0,
                y0,
                x1,
                y1,
                rng.random_range(0..nets),
            )
        })
        .collect();
    let vias = (0..rng.random_range(0..=2))
        .map(|_| {
            let size = 2.0 * rng.random_range(1..4) as f64;
            Via {
                lower_layer: [Layer::M0, Layer::M1][rng.random_range(0..2)],
                cx: rng.random_range(size as i32..=(w - size) as i32) as f64,
                cy: rng.random_range(size as i32..=(h - size) as i32) as f64,
                size,
                net: rng.random_range(0..nets),
            }
        })
        .collect();
    LayoutDesign {
        cell_name: "rand".into(),
        width: w,
        height: h,
        rects,
        vias,
        net_names: (0..nets).map(|i| format!("n{i}")).collect(),
    }
}
