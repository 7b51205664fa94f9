use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::synth::ManifestEntry;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
}

/// Validation size for a type with `n` entries: `round(ratio · n)`, at
/// least one, and never the whole type.
pub fn val_count(n: usize, val_ratio: f64) -> usize {
    ((val_ratio * n as f64).round() as usize).clamp(1, n.saturating_sub(1))
}

/// Per cell type, a seeded shuffle followed by a head/tail cut. Types are
/// visited in name order and ids are sorted first, so the result depends
/// only on the set of entries.
pub fn stratified_split(entries: &[ManifestEntry], val_ratio: f64, seed: u64) -> Result<Split> {
    if !(val_ratio > 0.0 && val_ratio < 1.0) {
        return Err(Error::Config(format!(
            "val_ratio must be in (0, 1), got {val_ratio}"
        )));
    }
    let mut by_type: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in entries {
        by_type.entry(&e.cell_type).or_default().push(&e.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
    };
    for (ty, mut ids) in by_type {
        if ids.len() < 2 {
            return Err(Error::Dataset(format!(
                "cell type {ty} has a single entry; cannot split"
            )));
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let k = val_count(ids.len(), val_ratio);
        split.val.extend(ids[..k].iter().map(|s| s.to_string()));
        split.train.extend(ids[k..].iter().map(|s| s.to_string()));
    }
    Ok(split)
}
