//! Layout JSON document.
//!
//! ```json
//! {
//!   "cell": "NAND2_D1_v000",
//!   "width_nm": 640.0,
//!   "height_nm": 520.0,
//!   "nets": ["A", "B", "Y", "VDD", "VSS"],
//!   "rects": [{"layer": "M1", "x0": 70, "y0": 30, "x1": 90, "y1": 250, "net": 2}],
//!   "vias":  [{"lower_layer": "M0", "cx": 80, "cy": 40, "size": 20, "net": 2}]
//! }
//! ```
//!
//! `net` fields index into `nets`. Layers are `M0`, `M1` or `M2`; anything
//! else is rejected. A via's `lower_layer` must be `M0` or `M1`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayoutDesign, Rect, Via};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub cell: String,
    pub width_nm: f64,
    pub height_nm: f64,
    pub nets: Vec<String>,
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub vias: Vec<Via>,
}

impl From<&LayoutDesign> for LayoutFile {
    fn from(d: &LayoutDesign) -> Self {
        Self {
            cell: d.cell_name.clone(),
            width_nm: d.width,
            height_nm: d.height,
            nets: d.net_names.clone(),
            rects: d.rects.clone(),
            vias: d.vias.clone(),
        }
    }
}

impl LayoutFile {
    pub fn into_design(self) -> Result<LayoutDesign> {
        let d = LayoutDesign {
            cell_name: self.cell,
            width: self.width_nm,
            height: self.height_nm,
            rects: self.rects,
            vias: self.vias,
            net_names: self.nets,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn parse(text: &str) -> Result<LayoutDesign> {
        let file: LayoutFile =
            serde_json::from_str(text).map_err(|e| Error::Geometry(format!("layout JSON: {e}")))?;
        file.into_design()
    }

    pub fn to_json(design: &LayoutDesign) -> String {
        serde_json::to_string_pretty(&LayoutFile::from(design)).expect("layout serializes")
    }
}

pub fn read_layout(path: &Path) -> Result<LayoutDesign> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    LayoutFile::parse(&text)
}

pub fn write_layout(path: &Path, design: &LayoutDesign) -> Result<()> {
    std::fs::write(path, LayoutFile::to_json(design)).map_err(|e| Error::file(path, e))
}
