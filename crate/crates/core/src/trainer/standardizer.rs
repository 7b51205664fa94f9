use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{NUM_TARGETS, TARGET_NAMES};

/// Per-target z-scoring with population statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; NUM_TARGETS],
    pub std: [f64; NUM_TARGETS],
}

impl Standardizer {
    pub fn fit(rows: &[[f64; NUM_TARGETS]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Training(
                "cannot fit a standardizer on zero rows".into(),
            ));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; NUM_TARGETS];
        let mut std = [0.0; NUM_TARGETS];
        for t in 0..NUM_TARGETS {
            mean[t] = rows.iter().map(|r| r[t]).sum::<f64>() / n;
            std[t] = (rows.iter().map(|r| (r[t] - mean[t]).powi(2)).sum::<f64>() / n).sqrt();
            if !(std[t] > 0.0 && std[t].is_finite()) {
                return Err(Error::Training(format!(
                    "target {} has zero spread",
                    TARGET_NAMES[t]
                )));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, y: &[f64; NUM_TARGETS]) -> [f64; NUM_TARGETS] {
        std::array::from_fn(|t| (y[t] - self.mean[t]) / self.std[t])
    }

    pub fn invert(&self, z: &[f64; NUM_TARGETS]) -> [f64; NUM_TARGETS] {
        std::array::from_fn(|t| z[t] * self.std[t] + self.mean[t])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
