//! Run configuration: one TOML document with `[synth]`, `[raster]`,
//! `[model]` and `[train]` tables. Missing keys take their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::ModelConfig;
use crate::geometry::RasterConfig;
use crate::synth::SynthConfig;
use crate::trainer::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub synth: SynthConfig,
    pub raster: RasterConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Which seeds a config file sets explicitly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExplicitSeeds {
    pub synth: bool,
    pub train: bool,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<(Self, ExplicitSeeds)> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let has = |section: &str| table.get(section).and_then(|s| s.get("seed")).is_some();
        let seeds = ExplicitSeeds {
            synth: has("synth"),
            train: has("train"),
        };
        let cfg: Config = table
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok((cfg, seeds))
    }

    pub fn load(path: &Path) -> Result<(Self, ExplicitSeeds)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.raster.validate()?;
        self.model.validate()?;
        self.train.validate()
    }
}
