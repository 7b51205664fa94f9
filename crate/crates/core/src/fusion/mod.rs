//! Graph-query/layout-key cross-attention, masked mean pooling, the
//! regression head, and the full model with its baseline variants.

mod dump;

pub use dump::{attention_dump, token_labels, AttentionDump, AttentionRow, TokenWeight};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoders::{
    Attention, GraphEncoder, GraphEncoderConfig, LayerNorm, LayoutEncoder, LayoutEncoderConfig,
    Linear,
};
use crate::error::{Error, Result};
use crate::geometry::{LayoutTensor, RasterConfig};
use crate::netlist::{GraphInput, EDGE_CORR, EDGE_NONE};
use crate::numcore::{ParamStore, Tape, Tensor, Var};

/// Number of regression targets.
pub const NUM_TARGETS: usize = 6;

/// Target order used everywhere: labels, predictions, reports.
pub const TARGET_NAMES: [&str; NUM_TARGETS] = [
    "rise_delay",
    "fall_delay",
    "rise_transition",
    "fall_transition",
    "rise_power",
    "fall_power",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Graph tokens attend over layout tokens.
    #[default]
    Fusioncell,
    /// Layout encoder only, mean of all tokens.
    VisionOnly,
    /// Mean-pooled encoder outputs concatenated (layout first).
    LateFusion,
    /// Cross-attention in both directions, pooled and concatenated.
    Symmetrical,
    /// Same as `Fusioncell` with correlation edges removed from the mask.
    FusioncellNoCorr,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Fusioncell,
        Variant::VisionOnly,
        Variant::LateFusion,
        Variant::Symmetrical,
        Variant::FusioncellNoCorr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fusioncell => "fusioncell",
            Variant::VisionOnly => "vision_only",
            Variant::LateFusion => "late_fusion",
            Variant::Symmetrical => "symmetrical",
            Variant::FusioncellNoCorr => "fusioncell_no_corr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model variant {s:?}")))
    }

    pub fn uses_graph(self) -> bool {
        self != Variant::VisionOnly
    }

    pub fn has_cross_attention(self) -> bool {
        matches!(
            self,
            Variant::Fusioncell | Variant::FusioncellNoCorr | Variant::Symmetrical
        )
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub d: usize,
    pub heads: usize,
    pub layout_layers: usize,
    pub graph_layers: usize,
    pub ffn_mult: usize,
    /// Hidden width of the regression head; `None` means `d`.
    pub head_hidden: Option<usize>,
    pub layout_dropout: f64,
    pub graph_dropout: f64,
    pub fusion_dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Fusioncell,
            d: 32,
            heads: 4,
            layout_layers: 2,
            graph_layers: 2,
            ffn_mult: 4,
            head_hidden: None,
            layout_dropout: 0.0,
            graph_dropout: 0.1,
            fusion_dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn head_hidden(&self) -> usize {
        self.head_hidden.unwrap_or(self.d)
    }

    pub fn layout_config(&self, raster: &RasterConfig) -> LayoutEncoderConfig {
        LayoutEncoderConfig {
            d: self.d,
            heads: self.heads,
            layers: self.layout_layers,
            ffn_mult: self.ffn_mult,
            patch_size: raster.patch_size,
            height: raster.height,
            width: raster.width,
            dropout: self.layout_dropout,
        }
    }

    pub fn graph_config(&self) -> GraphEncoderConfig {
        GraphEncoderConfig {
            d: self.d,
            heads: self.heads,
            layers: self.graph_layers,
            ffn_mult: self.ffn_mult,
            dropout: self.graph_dropout,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.head_hidden() == 0 {
            return Err(Error::Model("head_hidden must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.fusion_dropout) {
            return Err(Error::Model("fusion_dropout must be in [0, 1)".into()));
        }
        self.graph_config().validate()
    }
}

/// Multi-head attention from one token set onto another, followed by a
/// residual connection and layer norm. Invalid query rows pass through.
#[derive(Clone, Debug)]
pub struct CrossAttention {
    attention: Attention,
    norm: LayerNorm,
    dropout: f64,
}

pub struct CrossAttended {
    pub tokens: Var,
    /// Per head, `queries × keys`.
    pub weights: Vec<Var>,
}

impl CrossAttention {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        d: usize,
        heads: usize,
        dropout: f64,
    ) -> Self {
        Self {
            attention: Attention::new(store, rng, &format!("{name}.attn"), d, heads),
            norm: LayerNorm::new(store, &format!("{name}.norm"), d),
            dropout,
        }
    }

    /// `queries` attend over every row of `keys` for which `key_valid` is
    /// true (all rows when `None`).
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        queries: Var,
        query_valid: &[bool],
        keys: Var,
        key_valid: Option<&[bool]>,
    ) -> Result<CrossAttended> {
        let (nq, d) = (tape.shape(queries)[0], tape.shape(queries)[1]);
        if tape.shape(keys)[1] != d {
            return Err(Error::Model(format!(
                "cross-attention dims differ: queries {:?}, keys {:?}",
                tape.shape(queries),
                tape.shape(keys)
            )));
        }
        if query_valid.len() != nq {
            return Err(Error::Model(
                "query validity mask has the wrong length".into(),
            ));
        }
        let nk = tape.shape(keys)[0];
        let keep: Option<Vec<bool>> = key_valid.map(|kv| {
            (0..nq)
                .flat_map(|_| kv.iter().copied())
                .collect::<Vec<bool>>()
        });
        if let Some(k) = &keep {
            if k.len() != nq * nk {
                return Err(Error::Model(
                    "key validity mask has the wrong length".into(),
                ));
            }
        }
        let att = self
            .attention
            .forward(tape, store, queries, keys, keep.as_deref(), None)?;
        let a = tape.dropout(att.output, self.dropout)?;
        let x = tape.add(queries, a)?;
        let mut tokens = self.norm.forward(tape, store, x)?;
        if query_valid.iter().any(|v| !v) {
            let on: Vec<f64> = query_valid
                .iter()
                .flat_map(|&v| std::iter::repeat_n(f64::from(v), d))
                .collect();
            let off: Vec<f64> = on.iter().map(|v| 1.0 - v).collect();
            let on = tape.constant(Tensor::new(vec![nq, d], on)?);
            let off = tape.constant(Tensor::new(vec![nq, d], off)?);
            let kept = tape.mul(tokens, on)?;
            let passed = tape.mul(queries, off)?;
            tokens = tape.add(kept, passed)?;
        }
        Ok(CrossAttended {
            tokens,
            weights: att.weights,
        })
    }
}

/// Mean over the rows flagged valid, as a `1 × d` row.
pub fn pool(tape: &mut Tape, tokens: Var, valid: &[bool]) -> Result<Var> {
    let n = tape.shape(tokens)[0];
    if valid.len() != n {
        return Err(Error::Model(format!(
            "validity mask has {} entries for {n} rows",
            valid.len()
        )));
    }
    let count = valid.iter().filter(|&&v| v).count();
    if count == 0 {
        return Err(Error::Model("cannot pool zero valid rows".into()));
    }
    let w: Vec<f64> = valid
        .iter()
        .map(|&v| if v { 1.0 / count as f64 } else { 0.0 })
        .collect();
    let w = tape.constant(Tensor::new(vec![1, n], w)?);
    Ok(tape.matmul(w, tokens)?)
}

/// `LayerNorm → Linear → GeLU → dropout → Linear` onto the six targets.
#[derive(Clone, Debug)]
pub struct Head {
    pub norm: LayerNorm,
    pub hidden: Linear,
    pub output: Linear,
    pub dropout: f64,
}

impl Head {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        rng: &mut R,
        name: &str,
        input: usize,
        hidden: usize,
        dropout: f64,
    ) -> Self {
        Self {
            norm: LayerNorm::new(store, &format!("{name}.norm"), input),
            hidden: Linear::new(store, rng, &format!("{name}.hidden"), input, hidden),
            output: Linear::new(store, rng, &format!("{name}.output"), hidden, NUM_TARGETS),
            dropout,
        }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, z: Var) -> Result<Var> {
        let h = self.norm.forward(tape, store, z)?;
        let h = self.hidden.forward(tape, store, h)?;
        let h = tape.gelu(h)?;
        let h = tape.dropout(h, self.dropout)?;
        Ok(self.output.forward(tape, store, h)?)
    }
}

/// One cell as the model sees it. `graph` may be absent only for
/// variants that ignore the netlist.
#[derive(Clone, Debug)]
pub struct ModelInput {
    pub layout: LayoutTensor,
    pub graph: Option<GraphInput>,
}

pub struct Forward {
    /// `1 × 6` standardized prediction.
    pub prediction: Var,
    pub layout_tokens: Var,
    pub graph_tokens: Option<Var>,
    /// Graph-to-layout weights per head (`N × (P + 2)`), when the variant
    /// has that attention.
    pub cross_attention: Vec<Var>,
    /// Graph self-attention weights per layer and head.
    pub graph_attention: Vec<Vec<Var>>,
}

#[derive(Clone, Debug)]
pub struct FusionModel {
    pub config: ModelConfig,
    pub raster: RasterConfig,
    pub store: ParamStore,
    layout: LayoutEncoder,
    graph: Option<GraphEncoder>,
    cross: Option<CrossAttention>,
    reverse_cross: Option<CrossAttention>,
    head: Head,
}

impl FusionModel {
    pub fn new(config: ModelConfig, raster: RasterConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        raster.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (d, heads, v) = (config.d, config.heads, config.variant);
        let layout = LayoutEncoder::new(
            &mut store,
            &mut rng,
            "layout",
            config.layout_config(&raster),
        )?;
        let graph = v
            .uses_graph()
            .then(|| GraphEncoder::new(&mut store, &mut rng, "graph", config.graph_config()))
            .transpose()?;
        let cross = v.has_cross_attention().then(|| {
            CrossAttention::new(
                &mut store,
                &mut rng,
                "cross",
                d,
                heads,
                config.fusion_dropout,
            )
        });
        let reverse_cross = (v == Variant::Symmetrical).then(|| {
            CrossAttention::new(
                &mut store,
                &mut rng,
                "reverse_cross",
                d,
                heads,
                config.fusion_dropout,
            )
        });
        let head_in = match v {
            Variant::Fusioncell | Variant::FusioncellNoCorr | Variant::VisionOnly => d,
            Variant::LateFusion | Variant::Symmetrical => 2 * d,
        };
        let head = Head::new(
            &mut store,
            &mut rng,
            "head",
            head_in,
            config.head_hidden(),
            config.fusion_dropout,
        );
        Ok(Self {
            config,
            raster,
            store,
            layout,
            graph,
            cross,
            reverse_cross,
            head,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn graph_encoder(&self) -> Option<&GraphEncoder> {
        self.graph.as_ref()
    }

    pub fn forward(&self, tape: &mut Tape, input: &ModelInput) -> Result<Forward> {
        let store = &self.store;
        let variant = self.variant();
        let zl = self.layout.forward(tape, store, &input.layout)?;
        let layout_valid = vec![true; tape.shape(zl.tokens)[0]];
        let (zg, graph_attention) = match &self.graph {
            Some(enc) => {
                let g = input.graph.as_ref().ok_or_else(|| {
                    Error::Model(format!("variant {variant} needs a netlist graph"))
                })?;
                let stripped;
                let g = if variant == Variant::FusioncellNoCorr {
                    stripped = without_correlation(g);
                    &stripped
                } else {
                    g
                };
                let out = enc.forward(tape, store, g)?;
                (Some((out.tokens, out.valid)), out.attention)
            }
            None => (None, Vec::new()),
        };

        let mut cross_attention = Vec::new();
        let z = match (variant, &zg) {
            (Variant::VisionOnly, _) => pool(tape, zl.tokens, &layout_valid)?,
            (Variant::LateFusion, Some((g, valid))) => {
                let a = pool(tape, zl.tokens, &layout_valid)?;
                let b = pool(tape, *g, valid)?;
                tape.concat(&[a, b], 1)?
            }
            (Variant::Fusioncell | Variant::FusioncellNoCorr, Some((g, valid))) => {
                let cross = self.cross.as_ref().expect("variant has cross-attention");
                let fused = cross.forward(tape, store, *g, valid, zl.tokens, None)?;
                cross_attention = fused.weights;
                pool(tape, fused.tokens, valid)?
            }
            (Variant::Symmetrical, Some((g, valid))) => {
                let cross = self.cross.as_ref().expect("variant has cross-attention");
                let reverse = self
                    .reverse_cross
                    .as_ref()
                    .expect("symmetrical has reverse attention");
                let g_fused = cross.forward(tape, store, *g, valid, zl.tokens, None)?;
                let l_fused =
                    reverse.forward(tape, store, zl.tokens, &layout_valid, *g, Some(valid))?;
                cross_attention = g_fused.weights;
                let a = pool(tape, l_fused.tokens, &layout_valid)?;
                let b = pool(tape, g_fused.tokens, valid)?;
                tape.concat(&[a, b], 1)?
            }
            _ => unreachable!("graph encoder exists for every variant that uses it"),
        };
        let prediction = self.head.forward(tape, store, z)?;
        Ok(Forward {
            prediction,
            layout_tokens: zl.tokens,
            graph_tokens: zg.map(|(g, _)| g),
            cross_attention,
            graph_attention,
        })
    }

    /// Evaluation-mode standardized prediction.
    pub fn predict(&self, input: &ModelInput) -> Result<[f64; NUM_TARGETS]> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, input)?;
        let v = tape.value(out.prediction).data();
        Ok(std::array::from_fn(|i| v[i]))
    }
}

/// The same graph with correlation pairs removed from the mask.
pub fn without_correlation(g: &GraphInput) -> GraphInput {
    let mut out = g.clone();
    for t in &mut out.mask.edge_type {
        if *t == EDGE_CORR {
            *t = EDGE_NONE;
        }
    }
    out
}
