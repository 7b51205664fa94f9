use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Moment estimates for AdamW with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamWState {
    pub config: AdamWConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamWState {
    pub fn new(config: AdamWConfig, params: &ParamStore) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. `grads` is indexed like `params`.
    ///
    /// `p ← p·(1 − lr·λ) − lr·m̂/(√v̂ + ε)` with bias-corrected moments.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<(), TensorError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(TensorError::InvalidArgument(
                "gradient count does not match parameter count",
            ));
        }
        self.step += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<_> = params.ids().collect();
        for id in ids {
            let i = id.index();
            let g = grads[i].data();
            let p = params.get_mut(id);
            if p.shape() != grads[i].shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adamw_step",
                    lhs: p.shape().to_vec(),
                    rhs: grads[i].shape().to_vec(),
                });
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, pv) in p.data_mut().iter_mut().enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *pv *= 1.0 - lr * weight_decay;
                *pv -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Tensor], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|t| t.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for t in grads.iter_mut() {
            t.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
