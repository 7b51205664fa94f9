//! Layout data model and rasterization into 3-channel net-ID images.
//!
//! A [`LayoutDesign`] is a set of axis-aligned metal rectangles on three
//! routing layers plus vias between adjacent layers. [`rasterize`] turns
//! it into a [`LayoutTensor`] of shape `3 × H × W`: the channel is the
//! layer, and each occupied pixel carries the normalized ID of the net
//! that owns it (background is 0).

mod format;
mod raster;

pub use format::{read_layout, write_layout, LayoutFile};
pub use raster::{patchify, rasterize, unpatchify, PatchMatrix};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    M0,
    M1,
    M2,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::M0, Layer::M1, Layer::M2];

    pub fn channel(self) -> usize {
        self as usize
    }

    /// The layer a via on `self` connects up to.
    pub fn upper(self) -> Option<Layer> {
        match self {
            Layer::M0 => Some(Layer::M1),
            Layer::M1 => Some(Layer::M2),
            Layer::M2 => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub layer: Layer,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub net: usize,
}

impl Rect {
    pub fn new(layer: Layer, x0: f64, y0: f64, x1: f64, y1: f64, net: usize) -> Self {
        Self {
            layer,
            x0,
            y0,
            x1,
            y1,
            net,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    /// Longer side over shorter side: the number of squares of a wire.
    pub fn squares(&self) -> f64 {
        let (w, h) = (self.width(), self.height());
        w.max(h) / w.min(h)
    }

    pub fn is_horizontal(&self) -> bool {
        self.width() >= self.height()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Via {
    pub lower_layer: Layer,
    pub cx: f64,
    pub cy: f64,
    pub size: f64,
    pub net: usize,
}

/// Routed cell geometry in nanometers. Net IDs index `net_names`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutDesign {
    pub cell_name: String,
    pub width: f64,
    pub height: f64,
    pub rects: Vec<Rect>,
    pub vias: Vec<Via>,
    pub net_names: Vec<String>,
}

impl LayoutDesign {
    pub fn num_nets(&self) -> usize {
        self.net_names.len()
    }

    pub fn net_id(&self, name: &str) -> Option<usize> {
        self.net_names.iter().position(|n| n == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Geometry(format!("{}: {m}", self.cell_name)));
        if !(self.width.is_finite() && self.height.is_finite())
            || self.width <= 0.0
            || self.height <= 0.0
        {
            return bad(format!("zero-area design {}x{}", self.width, self.height));
        }
        let inside = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x <= self.width && y <= self.height;
        for r in &self.rects {
            let finite = [r.x0, r.y0, r.x1, r.y1].iter().all(|v| v.is_finite());
            if !finite || r.x0 >= r.x1 || r.y0 >= r.y1 {
                return bad(format!("degenerate rect {r:?}"));
            }
            if !inside(r.x0, r.y0) || !inside(r.x1, r.y1) {
                return bad(format!("rect outside cell bounds {r:?}"));
            }
            if r.net >= self.num_nets() {
                return bad(format!("rect references unknown net {}", r.net));
            }
        }
        for v in &self.vias {
            if v.lower_layer.upper().is_none() {
                return bad(format!("via on {:?} has no upper layer", v.lower_layer));
            }
            if !(v.size.is_finite() && v.size > 0.0) || !inside(v.cx, v.cy) {
                return bad(format!("invalid via {v:?}"));
            }
            if v.net >= self.num_nets() {
                return bad(format!("via references unknown net {}", v.net));
            }
        }
        Ok(())
    }

    /// Rotates the design a quarter turn: `(x, y) → (y, width − x)`.
    pub fn rotated_quarter_turn(&self) -> Self {
        let w = self.width;
        Self {
            cell_name: self.cell_name.clone(),
            width: self.height,
            height: self.width,
            rects: self
                .rects
                .iter()
                .map(|r| Rect::new(r.layer, r.y0, w - r.x1, r.y1, w - r.x0, r.net))
                .collect(),
            vias: self
                .vias
                .iter()
                .map(|v| Via {
                    cx: v.cy,
                    cy: w - v.cx,
                    ..v.clone()
                })
                .collect(),
            net_names: self.net_names.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetIdScheme {
    #[default]
    IndexFraction,
    HashedFraction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RasterConfig {
    pub height: usize,
    pub width: usize,
    pub patch_size: usize,
    pub via_spill_radius: usize,
    pub dilation_radius: usize,
    pub netid_scheme: NetIdScheme,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            patch_size: 8,
            via_spill_radius: 1,
            dilation_radius: 1,
            netid_scheme: NetIdScheme::IndexFraction,
        }
    }
}

impl RasterConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.patch_size;
        if p == 0
            || self.height == 0
            || self.width == 0
            || !self.height.is_multiple_of(p)
            || !self.width.is_multiple_of(p)
        {
            return Err(Error::Geometry(format!(
                "canvas {}x{} is not divisible by patch size {p}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn num_patches(&self) -> usize {
        (self.height / self.patch_size) * (self.width / self.patch_size)
    }

    pub fn patch_dim(&self) -> usize {
        3 * self.patch_size * self.patch_size
    }
}

/// `3 × H × W` net-ID image, channels ordered (M0, M1, M2).
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutTensor {
    pub cell_name: String,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl LayoutTensor {
    pub fn zeros(cell_name: impl Into<String>, height: usize, width: usize) -> Self {
        Self {
            cell_name: cell_name.into(),
            height,
            width,
            data: vec![0.0; 3 * height * width],
        }
    }

    pub fn at(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[channel * n..(channel + 1) * n]
    }
}

/// Maps a net to its pixel value in `(0, 1]`.
///
/// `IndexFraction` gives `(id + 1) / (n + 1)`, so 0 stays reserved for
/// background. `HashedFraction` hashes the net name and ignores the index.
pub fn normalize_net_id(
    net_id: usize,
    num_nets: usize,
    scheme: NetIdScheme,
    name: &str,
) -> Result<f64> {
    if num_nets == 0 {
        return Err(Error::Geometry(
            "cannot normalize net IDs with zero nets".into(),
        ));
    }
    if net_id >= num_nets {
        return Err(Error::Geometry(format!(
            "net id {net_id} out of range for {num_nets} nets"
        )));
    }
    Ok(match scheme {
        NetIdScheme::IndexFraction => (net_id + 1) as f64 / (num_nets + 1) as f64,
        NetIdScheme::HashedFraction => hashed_fraction(name),
    })
}

fn hashed_fraction(name: &str) -> f64 {
    const SPAN: u64 = 1 << 52;
    let digest = Sha256::digest(name.as_bytes());
    let h = u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"));
    ((h % SPAN) + 1) as f64 / SPAN as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_fraction_values() {
        let f = |id, n| normalize_net_id(id, n, NetIdScheme::IndexFraction, "x").unwrap();
        assert_eq!(f(0, 1), 0.5);
        assert_eq!(f(3, 7), 0.5);
        assert_eq!(f(6, 7), 7.0 / 8.0);
    }

    #[test]
    fn zero_nets_is_an_error() {
        assert!(normalize_net_id(0, 0, NetIdScheme::IndexFraction, "x").is_err());
    }

    #[test]
    fn hashed_fraction_is_deterministic_and_in_range() {
        let a = normalize_net_id(0, 3, NetIdScheme::HashedFraction, "net034").unwrap();
        let b = normalize_net_id(2, 5, NetIdScheme::HashedFraction, "net034").unwrap();
        let c = normalize_net_id(0, 3, NetIdScheme::HashedFraction, "net042").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a > 0.0 && a <= 1.0);
    }

    #[test]
    fn validation_catches_bad_geometry() {
        let mut d = LayoutDesign {
            cell_name: "t".into(),
            width: 10.0,
            height: 10.0,
            rects: vec![Rect::new(Layer::M1, 0.0, 0.0, 5.0, 5.0, 0)],
            vias: vec![],
            net_names: vec!["A".into()],
        };
        assert!(d.validate().is_ok());
        d.rects[0].net = 1;
        assert!(d.validate().is_err());
        d.rects[0].net = 0;
        d.rects[0].x1 = 11.0;
        assert!(d.validate().is_err());
        d.rects.clear();
        d.vias.push(Via {
            lower_layer: Layer::M2,
            cx: 1.0,
            cy: 1.0,
            size: 1.0,
            net: 0,
        });
        assert!(d.validate().is_err());
        d.vias.clear();
        d.height = 0.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn quarter_turn_swaps_dimensions() {
        let d = LayoutDesign {
            cell_name: "t".into(),
            width: 10.0,
            height: 4.0,
            rects: vec![Rect::new(Layer::M0, 1.0, 0.0, 3.0, 2.0, 0)],
            vias: vec![Via {
                lower_layer: Layer::M0,
                cx: 2.0,
                cy: 1.0,
                size: 1.0,
                net: 0,
            }],
            net_names: vec!["A".into()],
        };
        let r = d.rotated_quarter_turn();
        assert_eq!((r.width, r.height), (4.0, 10.0));
        assert_eq!(r.rects[0], Rect::new(Layer::M0, 0.0, 7.0, 2.0, 9.0, 0));
        assert_eq!((r.vias[0].cx, r.vias[0].cy), (1.0, 8.0));
        assert!(r.validate().is_ok());
    }
}
