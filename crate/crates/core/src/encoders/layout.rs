use rand::Rng;
use serde::{Deserialize, Serialize};

use super::blocks::{Block, LayerNorm, Linear};
use crate::error::{Error, Result};
use crate::geometry::{patchify, LayoutTensor};
use crate::numcore::{normal_init, ParamId, ParamStore, Tape, Tensor, Var};

/// Number of tokens placed before the patch tokens: class and distillation.
pub const SPECIAL_TOKENS: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutEncoderConfig {
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_mult: usize,
    pub patch_size: usize,
    pub height: usize,
    pub width: usize,
    pub dropout: f64,
}

impl LayoutEncoderConfig {
    pub fn num_patches(&self) -> usize {
        (self.height / self.patch_size) * (self.width / self.patch_size)
    }

    pub fn num_tokens(&self) -> usize {
        self.num_patches() + SPECIAL_TOKENS
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Model(format!("layout encoder: {m}")));
        if self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return bad("d must be divisible by heads");
        }
        if self.layers == 0 || self.ffn_mult == 0 {
            return bad("layers and ffn_mult must be at least 1");
        }
        if self.patch_size == 0
            || !self.height.is_multiple_of(self.patch_size)
            || !self.width.is_multiple_of(self.patch_size)
        {
            return bad("canvas must be divisible by patch size");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// Patch embedding, class/distillation tokens, learned positions and a
/// stack of pre-norm transformer blocks.
#[derive(Clone, Debug)]
pub struct LayoutEncoder {
    pub config: LayoutEncoderConfig,
    patch_embed: Linear,
    cls: ParamId,
    dist: ParamId,
    pos: ParamId,
    blocks: Vec<Block>,
    norm: LayerNorm,
}

/// Token matrix `(P + 2) × d` ordered `[cls, dist, patch_1 … patch_P]`,
/// plus the self-attention weights of every layer and head.
pub struct LayoutTokens {
    pub tokens: Var,
    pub attention: Vec<Vec<Var>>,
}

impl LayoutEncoder {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        config: LayoutEncoderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.d;
        let patch_dim = 3 * config.patch_size * config.patch_size;
        let patch_embed = Linear::new(store, rng, &format!("{name}.patch_embed"), patch_dim, d);
        let cls = store.insert(format!("{name}.cls"), normal_init(rng, 0.02, &[1, d]));
        let dist = store.insert(format!("{name}.dist"), normal_init(rng, 0.02, &[1, d]));
        let pos = store.insert(
            format!("{name}.pos"),
            normal_init(rng, 0.02, &[config.num_tokens(), d]),
        );
        let blocks = (0..config.layers)
            .map(|l| {
                let n = format!("{name}.blocks.{l}");
                Block::new(
                    store,
                    rng,
                    &n,
                    d,
                    config.heads,
                    config.ffn_mult,
                    config.dropout,
                )
            })
            .collect();
        let norm = LayerNorm::new(store, &format!("{name}.norm"), d);
        Ok(Self {
            config,
            patch_embed,
            cls,
            dist,
            pos,
            blocks,
            norm,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        layout: &LayoutTensor,
    ) -> Result<LayoutTokens> {
        let c = &self.config;
        if layout.height != c.height || layout.width != c.width {
            return Err(Error::Model(format!(
                "layout tensor is {}x{} but the encoder expects {}x{}",
                layout.height, layout.width, c.height, c.width
            )));
        }
        let patches = patchify(layout, c.patch_size)?;
        let x = tape.constant(Tensor::new(vec![patches.rows, patches.cols], patches.data)?);
        let x = self.patch_embed.forward(tape, store, x)?;
        let cls = tape.param(store, self.cls);
        let dist = tape.param(store, self.dist);
        let x = tape.concat(&[cls, dist, x], 0)?;
        let pos = tape.param(store, self.pos);
        let mut x = tape.add(x, pos)?;
        let mut attention = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let out = block.forward(tape, store, x, None, None)?;
            x = out.output;
            attention.push(out.weights);
        }
        let tokens = self.norm.forward(tape, store, x)?;
        Ok(LayoutTokens { tokens, attention })
    }

    /// Evaluation-mode token matrix.
    pub fn encode(&self, store: &ParamStore, layout: &LayoutTensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, store, layout)?;
        Ok(tape.value(out.tokens).clone())
    }
}
