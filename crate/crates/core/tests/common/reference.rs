//! Straight-line re-implementation of the model forward pass on nested
//! vectors, reading parameters by name. Used as an oracle for the tape.

use fusioncell::fusion::{FusionModel, ModelInput, Variant};
use fusioncell::netlist::EDGE_CORR;
use fusioncell::numcore::Tensor;

pub type Mat = Vec<Vec<f64>>;

fn param<'a>(m: &'a FusionModel, name: &str) -> &'a Tensor {
    m.store
        .get(m.store.id(name).unwrap_or_else(|| panic!("missing {name}")))
}

fn mat(t: &Tensor) -> Mat {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r)
        .map(|i| t.data()[i * c..(i + 1) * c].to_vec())
        .collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum())
                .collect()
        })
        .collect()
}

fn linear(m: &FusionModel, name: &str, x: &Mat) -> Mat {
    let w = mat(param(m, &format!("{name}.weight")));
    let b = param(m, &format!("{name}.bias")).data();
    matmul(x, &w)
        .into_iter()
        .map(|r| r.iter().zip(b).map(|(v, bb)| v + bb).collect())
        .collect()
}

fn layer_norm(m: &FusionModel, name: &str, x: &Mat) -> Mat {
    let g = param(m, &format!("{name}.gamma")).data();
    let b = param(m, &format!("{name}.beta")).data();
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let inv = 1.0 / (var + 1e-5).sqrt();
            r.iter()
                .enumerate()
                .map(|(i, v)| (v - mean) * inv * g[i] + b[i])
                .collect()
        })
        .collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

/// Returns the output and the per-head weights.
fn attention(
    m: &FusionModel,
    name: &str,
    heads: usize,
    q_in: &Mat,
    kv_in: &Mat,
    allowed: &dyn Fn(usize, usize) -> bool,
    bias: &dyn Fn(usize, usize, usize) -> f64,
) -> (Mat, Vec<Mat>) {
    let q = linear(m, &format!("{name}.query"), q_in);
    let k = linear(m, &format!("{name}.key"), kv_in);
    let v = linear(m, &format!("{name}.value"), kv_in);
    let d = q[0].len();
    let dh = d / heads;
    let mut out = vec![vec![0.0; d]; q.len()];
    let mut all_w = Vec::new();
    for h in 0..heads {
        let mut w = vec![vec![0.0; k.len()]; q.len()];
        for i in 0..q.len() {
            let logits: Vec<f64> = (0..k.len())
                .map(|j| {
                    if !allowed(i, j) {
                        return -1e9;
                    }
                    let dot: f64 = (0..dh).map(|c| q[i][h * dh + c] * k[j][h * dh + c]).sum();
                    dot / (dh as f64).sqrt() + bias(h, i, j)
                })
                .collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let s: f64 = e.iter().sum();
            for j in 0..k.len() {
                w[i][j] = e[j] / s;
                for c in 0..dh {
                    out[i][h * dh + c] += w[i][j] * v[j][h * dh + c];
                }
            }
        }
        all_w.push(w);
    }
    (linear(m, &format!("{name}.output"), &out), all_w)
}

fn block(
    m: &FusionModel,
    name: &str,
    heads: usize,
    x: &Mat,
    allowed: &dyn Fn(usize, usize) -> bool,
    bias: &dyn Fn(usize, usize, usize) -> f64,
) -> Mat {
    let h = layer_norm(m, &format!("{name}.norm1"), x);
    let (a, _) = attention(m, &format!("{name}.attn"), heads, &h, &h, allowed, bias);
    let x = add(x, &a);
    let h = layer_norm(m, &format!("{name}.norm2"), &x);
    let h = linear(m, &format!("{name}.ffn_in"), &h);
    let h: Mat = h
        .into_iter()
        .map(|r| r.into_iter().map(gelu).collect())
        .collect();
    let h = linear(m, &format!("{name}.ffn_out"), &h);
    add(&x, &h)
}

fn mean_rows(x: &Mat) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x[0].len())
        .map(|c| x.iter().map(|r| r[c]).sum::<f64>() / n)
        .collect()
}

pub fn layout_tokens(m: &FusionModel, input: &ModelInput) -> Mat {
    let cfg = &m.raster;
    let p = cfg.patch_size;
    let t = &input.layout;
    let mut patches = Vec::new();
    for pr in 0..cfg.height / p {
        for pc in 0..cfg.width / p {
            let mut v = Vec::new();
            for ch in 0..3 {
                for r in 0..p {
                    for c in 0..p {
                        v.push(t.at(ch, pr * p + r, pc * p + c));
                    }
                }
            }
            patches.push(v);
        }
    }
    let mut x = vec![
        param(m, "layout.cls").data().to_vec(),
        param(m, "layout.dist").data().to_vec(),
    ];
    x.extend(linear(m, "layout.patch_embed", &patches));
    let mut x = add(&x, &mat(param(m, "layout.pos")));
    for l in 0..m.config.layout_layers {
        x = block(
            m,
            &format!("layout.blocks.{l}"),
            m.config.heads,
            &x,
            &|_, _| true,
            &|_, _, _| 0.0,
        );
    }
    layer_norm(m, "layout.norm", &x)
}

pub fn graph_tokens(m: &FusionModel, input: &ModelInput) -> Mat {
    let g = input.graph.as_ref().unwrap();
    let drop_corr = m.variant() == Variant::FusioncellNoCorr;
    let etype = |i: usize, j: usize| {
        let t = g.mask.edge_type(i, j);
        if drop_corr && t == EDGE_CORR {
            0
        } else {
            t
        }
    };
    let mut x = linear(m, "graph.input", &mat(&g.features));
    for l in 0..m.config.graph_layers {
        let name = format!("graph.blocks.{l}");
        let table = param(m, &format!("{name}.edge_bias")).data().to_vec();
        let bias = |h: usize, i: usize, j: usize| table[h * 4 + etype(i, j) as usize];
        x = block(
            m,
            &name,
            m.config.heads,
            &x,
            &|i, j| etype(i, j) != 0,
            &bias,
        );
    }
    layer_norm(m, "graph.norm", &x)
}

fn cross(m: &FusionModel, name: &str, q: &Mat, kv: &Mat) -> (Mat, Vec<Mat>) {
    let (a, w) = attention(
        m,
        &format!("{name}.attn"),
        m.config.heads,
        q,
        kv,
        &|_, _| true,
        &|_, _, _| 0.0,
    );
    (layer_norm(m, &format!("{name}.norm"), &add(q, &a)), w)
}

fn head(m: &FusionModel, z: Vec<f64>) -> Vec<f64> {
    let h = layer_norm(m, "head.norm", &vec![z]);
    let h = linear(m, "head.hidden", &h);
    let h: Mat = h
        .into_iter()
        .map(|r| r.into_iter().map(gelu).collect())
        .collect();
    linear(m, "head.output", &h).remove(0)
}

/// Evaluation-mode prediction.
pub fn predict(m: &FusionModel, input: &ModelInput) -> Vec<f64> {
    let zl = layout_tokens(m, input);
    match m.variant() {
        Variant::VisionOnly => head(m, mean_rows(&zl)),
        Variant::LateFusion => {
            let mut z = mean_rows(&zl);
            z.extend(mean_rows(&graph_tokens(m, input)));
            head(m, z)
        }
        Variant::Fusioncell | Variant::FusioncellNoCorr => {
            let zg = graph_tokens(m, input);
            head(m, mean_rows(&cross(m, "cross", &zg, &zl).0))
        }
        Variant::Symmetrical => {
            let zg = graph_tokens(m, input);
            let g_fused = cross(m, "cross", &zg, &zl).0;
            let l_fused = cross(m, "reverse_cross", &zl, &zg).0;
            let mut z = mean_rows(&l_fused);
            z.extend(mean_rows(&g_fused));
            head(m, z)
        }
    }
}

/// Head-averaged graph-to-layout weights.
pub fn cross_weights(m: &FusionModel, input: &ModelInput) -> Mat {
    let zl = layout_tokens(m, input);
    let zg = graph_tokens(m, input);
    let (_, w) = cross(m, "cross", &zg, &zl);
    let heads = w.len() as f64;
    (0..w[0].len())
        .map(|i| {
            (0..w[0][0].len())
                .map(|j| w.iter().map(|h| h[i][j]).sum::<f64>() / heads)
                .collect()
        })
        .collect()
}
