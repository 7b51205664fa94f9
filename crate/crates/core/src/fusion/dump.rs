//! Head-averaged graph-to-layout attention, one row per graph node.

use serde::{Deserialize, Serialize};

use super::{FusionModel, ModelInput};
use crate::error::{Error, Result};
use crate::netlist::NodeKind;
use crate::numcore::Tape;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenWeight {
    pub token: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRow {
    pub node: String,
    pub kind: NodeKind,
    pub weights: Vec<TokenWeight>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionDump {
    pub cell: String,
    pub variant: String,
    pub rows: Vec<AttentionRow>,
}

/// Layout token labels: `cls`, `dist`, then `p_<row>_<col>` in patch order.
pub fn token_labels(grid_height: usize, grid_width: usize) -> Vec<String> {
    let mut labels = vec!["cls".to_string(), "dist".to_string()];
    for r in 0..grid_height {
        for c in 0..grid_width {
            labels.push(format!("p_{r}_{c}"));
        }
    }
    labels
}

pub fn attention_dump(model: &FusionModel, input: &ModelInput) -> Result<AttentionDump> {
    if !model.variant().has_cross_attention() {
        return Err(Error::Model(format!(
            "variant {} has no graph-to-layout attention; only fusioncell, fusioncell_no_corr and symmetrical checkpoints can be dumped",
            model.variant()
        )));
    }
    let graph = input
        .graph
        .as_ref()
        .ok_or_else(|| Error::Model("attention dump needs a netlist graph".into()))?;
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, input)?;
    if out.cross_attention.is_empty() {
        return Err(Error::Model(format!(
            "variant {} has no graph-to-layout attention",
            model.variant()
        )));
    }
    let p = model.raster.patch_size;
    let labels = token_labels(model.raster.height / p, model.raster.width / p);
    let heads = out.cross_attention.len() as f64;
    let n = graph.num_nodes();
    let t = labels.len();
    let mut avg = vec![0.0; n * t];
    for w in &out.cross_attention {
        for (a, v) in avg.iter_mut().zip(tape.value(*w).data()) {
            *a += v / heads;
        }
    }
    let rows = (0..n)
        .map(|i| AttentionRow {
            node: graph.names[i].clone(),
            kind: graph.kinds[i],
            weights: labels
                .iter()
                .enumerate()
                .map(|(j, token)| TokenWeight {
                    token: token.clone(),
                    weight: avg[i * t + j],
                })
                .collect(),
        })
        .collect();
    Ok(AttentionDump {
        cell: input.layout.cell_name.clone(),
        variant: model.variant().to_string(),
        rows,
    })
}
