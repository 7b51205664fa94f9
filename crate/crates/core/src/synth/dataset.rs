//! Dataset generation and the on-disk manifest.
//!
//! ```text
//! out/
//!   manifest.json
//!   labels.csv
//!   cells/<id>.sp
//!   cells/<id>.layout.json
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate_cell, label_generated, Family, Labels, SynthConfig, LABEL_COLUMNS};
use crate::error::{Error, Result};
use crate::geometry::LayoutFile;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub cell_type: String,
    pub family: Family,
    pub drive: u32,
    pub variant: usize,
    /// Relative to the dataset directory.
    pub netlist: String,
    pub layout: String,
    pub labels: Labels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub config: SynthConfig,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn cell_types(&self) -> Vec<String> {
        let mut t: Vec<String> = self.entries.iter().map(|e| e.cell_type.clone()).collect();
        t.sort();
        t.dedup();
        t
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// A manifest together with the directory its paths are relative to.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        Ok(Self {
            root: root.to_path_buf(),
            manifest: load_manifest(root)?,
        })
    }

    pub fn netlist_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.netlist)
    }

    pub fn layout_path(&self, e: &ManifestEntry) -> PathBuf {
        self.root.join(&e.layout)
    }
}

pub fn labels_csv(entries: &[ManifestEntry]) -> String {
    let mut s = format!("id,{}\n", LABEL_COLUMNS.join(","));
    for e in entries {
        let vals: Vec<String> = e
            .labels
            .to_array()
            .iter()
            .map(|v| format!("{v:.9}"))
            .collect();
        writeln!(s, "{},{}", e.id, vals.join(",")).expect("string write");
    }
    s
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// Generates every (family, drive, variant) cell, labels it and writes the
/// dataset under `out`. Output bytes depend only on `cfg`.
pub fn build_dataset(cfg: &SynthConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let cells = out.join("cells");
    std::fs::create_dir_all(&cells).map_err(|e| Error::file(&cells, e))?;
    let mut entries = Vec::with_capacity(cfg.num_cells());
    for spec in &cfg.families {
        for &drive in &spec.drives {
            for variant in 0..cfg.variants_per_type {
                let cell = generate_cell(spec.function, drive, variant, cfg)?;
                let labels = label_generated(&cell, cfg)?;
                let netlist = format!("cells/{}.sp", cell.id);
                let layout = format!("cells/{}.layout.json", cell.id);
                write(&out.join(&netlist), &cell.netlist)?;
                write(&out.join(&layout), &LayoutFile::to_json(&cell.design))?;
                entries.push(ManifestEntry {
                    id: cell.id,
                    cell_type: cell.cell_type,
                    family: spec.function,
                    drive,
                    variant,
                    netlist,
                    layout,
                    labels,
                });
            }
        }
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: cfg.seed,
        config: cfg.clone(),
        entries,
    };
    write(
        &out.join("manifest.json"),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    write(&out.join("labels.csv"), &labels_csv(&manifest.entries))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported manifest version {}",
            m.version
        )));
    }
    let mut ids: Vec<&str> = m.entries.iter().map(|e| e.id.as_str()).collect();
    ids.sort();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Dataset("duplicate cell id in manifest".into()));
    }
    Ok(m)
}
