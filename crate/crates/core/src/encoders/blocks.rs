//! Layers shared by the encoders and the fusion stage.

use rand::Rng;

use crate::numcore::{kaiming_uniform, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

type Result<T> = std::result::Result<T, TensorError>;

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Linear {
    /// Weight `fan_in × fan_out` drawn from U(±1/√fan_in), bias zero.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Self {
        let weight = store.insert(
            format!("{name}.weight"),
            kaiming_uniform(rng, fan_in, &[fan_in, fan_out]),
        );
        let bias = store.insert(format!("{name}.bias"), Tensor::zeros(&[fan_out]));
        Self { weight, bias }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_row(y, b)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        let gamma = store.insert(format!("{name}.gamma"), Tensor::full(&[dim], 1.0));
        let beta = store.insert(format!("{name}.beta"), Tensor::zeros(&[dim]));
        Self { gamma, beta }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gamma);
        let b = tape.param(store, self.beta);
        tape.layer_norm(x, g, b)
    }
}

/// Query/key/value/output projections of one multi-head attention layer.
#[derive(Clone, Debug)]
pub struct Attention {
    pub heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

/// Result of an attention layer: the projected output and the per-head
/// weight matrices (`queries × keys`, rows sum to one).
pub struct Attended {
    pub output: Var,
    pub weights: Vec<Var>,
}

impl Attention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        heads: usize,
    ) -> Self {
        assert!(
            heads > 0 && d.is_multiple_of(heads),
            "d={d} must be divisible by heads={heads}"
        );
        Self {
            heads,
            query: Linear::new(store, rng, &format!("{name}.query"), d, d),
            key: Linear::new(store, rng, &format!("{name}.key"), d, d),
            value: Linear::new(store, rng, &format!("{name}.value"), d, d),
            output: Linear::new(store, rng, &format!("{name}.output"), d, d),
        }
    }

    /// Scaled dot-product attention of `queries` over `keys_values`.
    ///
    /// `keep` (row-major `queries × keys`) marks allowed pairs; disallowed
    /// logits are replaced by the mask value. `bias` adds one logit matrix
    /// per head before masking.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        queries: Var,
        keys_values: Var,
        keep: Option<&[bool]>,
        bias: Option<&[Var]>,
    ) -> Result<Attended> {
        let d = tape.shape(queries)[1];
        if tape.shape(keys_values)[1] != d {
            return Err(TensorError::ShapeMismatch {
                op: "attention",
                lhs: tape.shape(queries).to_vec(),
                rhs: tape.shape(keys_values).to_vec(),
            });
        }
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.query.forward(tape, store, queries)?;
        let k = self.key.forward(tape, store, keys_values)?;
        let v = self.value.forward(tape, store, keys_values)?;
        let mut outs = Vec::with_capacity(self.heads);
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = tape.slice(q, 1, h * dh, dh)?;
            let kh = tape.slice(k, 1, h * dh, dh)?;
            let vh = tape.slice(v, 1, h * dh, dh)?;
            let kt = tape.transpose(kh)?;
            let logits = tape.matmul(qh, kt)?;
            let mut logits = tape.scale(logits, scale)?;
            if let Some(bias) = bias {
                logits = tape.add(logits, bias[h])?;
            }
            if let Some(keep) = keep {
                logits = tape.masked_fill(logits, keep)?;
            }
            let a = tape.softmax(logits)?;
            outs.push(tape.matmul(a, vh)?);
            weights.push(a);
        }
        let joined = if outs.len() == 1 {
            outs[0]
        } else {
            tape.concat(&outs, 1)?
        };
        let output = self.output.forward(tape, store, joined)?;
        Ok(Attended { output, weights })
    }
}

/// Pre-norm transformer block: `x + MSA(LN(x))`, then `x + FFN(LN(x))`.
#[derive(Clone, Debug)]
pub struct Block {
    pub norm1: LayerNorm,
    pub attention: Attention,
    pub norm2: LayerNorm,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
    pub dropout: f64,
}

impl Block {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        heads: usize,
        ffn_mult: usize,
        dropout: f64,
    ) -> Self {
        let hidden = d * ffn_mult;
        Self {
            norm1: LayerNorm::new(store, &format!("{name}.norm1"), d),
            attention: Attention::new(store, rng, &format!("{name}.attn"), d, heads),
            norm2: LayerNorm::new(store, &format!("{name}.norm2"), d),
            ffn_in: Linear::new(store, rng, &format!("{name}.ffn_in"), d, hidden),
            ffn_out: Linear::new(store, rng, &format!("{name}.ffn_out"), hidden, d),
            dropout,
        }
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        keep: Option<&[bool]>,
        bias: Option<&[Var]>,
    ) -> Result<Attended> {
        let h = self.norm1.forward(tape, store, x)?;
        let att = self.attention.forward(tape, store, h, h, keep, bias)?;
        let a = tape.dropout(att.output, self.dropout)?;
        let x = tape.add(x, a)?;
        let h = self.norm2.forward(tape, store, x)?;
        let h = self.ffn_in.forward(tape, store, h)?;
        let h = tape.gelu(h)?;
        let h = self.ffn_out.forward(tape, store, h)?;
        let h = tape.dropout(h, self.dropout)?;
        let output = tape.add(x, h)?;
        Ok(Attended {
            output,
            weights: att.weights,
        })
    }
}
