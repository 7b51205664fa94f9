use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{Block, LayerNorm, Linear};
use crate::error::{Error, Result};
use crate::netlist::{GraphInput, NodeKind, NUM_FEATURES};
use crate::numcore::{ParamId, ParamStore, Tape, Tensor, Var};

/// Edge types: none, connectivity, correlation, self.
pub const NUM_EDGE_TYPES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphEncoderConfig {
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_mult: usize,
    pub dropout: f64,
}

impl GraphEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(format!("graph encoder: {m}")));
        if self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return bad("d must be divisible by heads");
        }
        if self.layers == 0 || self.ffn_mult == 0 {
            return bad("layers and ffn_mult must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// Transformer over netlist nodes whose attention is restricted to graph
/// neighbours and shifted by a learned scalar per (layer, head, edge type).
#[derive(Clone, Debug)]
pub struct GraphEncoder {
    pub config: GraphEncoderConfig,
    input: Linear,
    edge_bias: Vec<ParamId>,
    blocks: Vec<Block>,
    norm: LayerNorm,
}

/// Node token matrix `N × d` with per-node kind and validity, plus the
/// self-attention weights of every layer and head.
pub struct GraphTokens {
    pub tokens: Var,
    pub kinds: Vec<NodeKind>,
    pub valid: Vec<bool>,
    pub attention: Vec<Vec<Var>>,
}

impl GraphEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        config: GraphEncoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.d;
        let input = Linear::new(store, rng, &format!("{name}.input"), NUM_FEATURES, d);
        let mut edge_bias = Vec::with_capacity(config.layers);
        let mut blocks = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let n = format!("{name}.blocks.{l}");
            blocks.push(Block::new(
                store,
                rng,
                &n,
                d,
                config.heads,
                config.ffn_mult,
                config.dropout,
            ));
            edge_bias.push(store.insert(
                format!("{n}.edge_bias"),
                Tensor::zeros(&[config.heads * NUM_EDGE_TYPES]),
            ));
        }
        let norm = LayerNorm::new(store, &format!("{name}.norm"), d);
        Ok(Self {
            config,
            input,
            edge_bias,
            blocks,
            norm,
        })
    }

    pub fn edge_bias_param(&self, layer: usize) -> ParamId {
        self.edge_bias[layer]
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &GraphInput,
    ) -> Result<GraphTokens> {
        let n = graph.num_nodes();
        let shape = graph.features.shape();
        if shape != [n, NUM_FEATURES] || graph.mask.n != n {
            return Err(Error::Model(format!(
                "graph input has features {shape:?} and a {}-node mask for {n} nodes",
                graph.mask.n
            )));
        }
        let keep = graph.mask.allowed_flags();
        let heads = self.config.heads;
        // Index into the flattened (head, edge type) bias table, per head.
        let bias_index: Vec<Vec<usize>> = (0..heads)
            .map(|h| {
                graph
                    .mask
                    .edge_type
                    .iter()
                    .map(|&t| h * NUM_EDGE_TYPES + t as usize)
                    .collect()
            })
            .collect();

        let x = tape.constant(graph.features.clone());
        let mut x = self.input.forward(tape, store, x)?;
        let mut attention = Vec::with_capacity(self.blocks.len());
        for (block, &bias_id) in self.blocks.iter().zip(&self.edge_bias) {
            let table = tape.param(store, bias_id);
            let bias = bias_index
                .iter()
                .map(|idx| tape.gather(table, idx, &[n, n]))
                .collect::<std::result::Result<Vec<Var>, _>>()?;
            let out = block.forward(tape, store, x, Some(&keep), Some(&bias))?;
            x = out.output;
            attention.push(out.weights);
        }
        let tokens = self.norm.forward(tape, store, x)?;
        Ok(GraphTokens {
            tokens,
            kinds: graph.kinds.clone(),
            valid: vec![true; n],
            attention,
        })
    }

    /// Evaluation-mode token matrix.
    pub fn encode(&self, store: &ParamStore, graph: &GraphInput) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, store, graph)?;
        Ok(tape.value(out.tokens).clone())
    }
}
