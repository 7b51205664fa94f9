//! Run manifests and seed resolution.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use fusioncell::config::Config;
use serde::Serialize;

pub const SEED_ENV: &str = "FUSIONCELL_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Config,
    Env,
    Flag,
    Default,
}

/// Config file beats `FUSIONCELL_SEED`, which beats `--seed`.
pub fn resolve_seed(
    from_config: Option<u64>,
    env: Option<&str>,
    flag: Option<u64>,
    default: u64,
) -> Result<(u64, SeedSource)> {
    if let Some(s) = from_config {
        return Ok((s, SeedSource::Config));
    }
    if let Some(v) = env {
        let s = v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer"))?;
        return Ok((s, SeedSource::Env));
    }
    Ok(match flag {
        Some(s) => (s, SeedSource::Flag),
        None => (default, SeedSource::Default),
    })
}

pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok().filter(|s| !s.is_empty())
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: Config,
}

impl RunManifest {
    pub fn new(command: &str, config: &Config, seed: u64, seed_source: SeedSource) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            seed,
            seed_source,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn input(mut self, key: &str, path: &Path) -> Self {
        self.inputs.insert(key.into(), path.display().to_string());
        self
    }

    pub fn output(mut self, key: &str, path: &Path) -> Self {
        self.outputs.insert(key.into(), path.display().to_string());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}
