use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Sample, Standardizer};
use crate::error::{Error, Result};
use crate::fusion::{FusionModel, ModelConfig, NUM_TARGETS};
use crate::geometry::RasterConfig;
use crate::numcore::{
    checkpoint, clip_grad_norm, AdamWConfig, AdamWState, ParamStore, Tape, Tensor,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub val_ratio: f64,
    /// Global gradient-norm clip; off when `None`.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            lr: 5e-5,
            weight_decay: 0.01,
            seed: 0,
            val_ratio: 0.1,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return Err(Error::Config(format!(
                "val_ratio must be in (0, 1), got {}",
                self.val_ratio
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "lr and weight_decay must be non-negative".into(),
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

pub fn loss_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_mse,val_mse\n");
    for r in history {
        writeln!(s, "{},{:.12e},{:.12e}", r.epoch, r.train_mse, r.val_mse).expect("string write");
    }
    s
}

/// A model with the statistics that map its outputs back to raw units.
#[derive(Clone, Debug)]
pub struct Trained {
    pub model: FusionModel,
    pub standardizer: Standardizer,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Trained,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

fn dropout_seed(seed: u64, step: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ step.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(17)
}

/// `(1/B) Σ ‖ŷ − y‖²` over standardized targets, recorded on `tape`.
pub fn batch_loss(
    model: &FusionModel,
    tape: &mut Tape,
    batch: &[&Sample],
    targets: &[[f64; NUM_TARGETS]],
) -> Result<crate::numcore::Var> {
    let mut total = None;
    for (s, z) in batch.iter().zip(targets) {
        let pred = model.forward(tape, &s.input)?.prediction;
        let y = tape.constant(Tensor::new(vec![1, NUM_TARGETS], z.to_vec())?);
        let diff = tape.sub(pred, y)?;
        let sq = tape.mul(diff, diff)?;
        let sum = tape.sum_all(sq)?;
        total = Some(match total {
            None => sum,
            Some(t) => tape.add(t, sum)?,
        });
    }
    let total = total.ok_or_else(|| Error::Training("empty batch".into()))?;
    Ok(tape.scale(total, 1.0 / batch.len() as f64)?)
}

/// Eval-mode mean of `‖ŷ − y‖²` over `samples`, in standardized units.
pub fn evaluate_mse(
    model: &FusionModel,
    standardizer: &Standardizer,
    samples: &[Sample],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Training("cannot evaluate on zero samples".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let p = model.predict(&s.input)?;
        let z = standardizer.apply(&s.target);
        total += p.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    Ok(total / samples.len() as f64)
}

/// One optimizer step on `batch`; returns the training-mode loss.
pub fn train_step(
    model: &mut FusionModel,
    adam: &mut AdamWState,
    batch: &[&Sample],
    standardizer: &Standardizer,
    clip_norm: Option<f64>,
    dropout_seed: u64,
) -> Result<f64> {
    let targets: Vec<_> = batch
        .iter()
        .map(|s| standardizer.apply(&s.target))
        .collect();
    let mut tape = Tape::training(dropout_seed);
    let loss = batch_loss(model, &mut tape, batch, &targets)
        .map_err(|e| Error::Training(format!("forward pass failed: {e}")))?;
    let value = tape.value(loss).data()[0];
    let mut grads = tape.backward(loss, &model.store)?;
    if !value.is_finite()
        || grads
            .iter()
            .any(|g| g.data().iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Training(format!(
            "non-finite loss or gradient (loss = {value})"
        )));
    }
    if let Some(c) = clip_norm {
        clip_grad_norm(&mut grads, c);
    }
    adam.step(&mut model.store, &grads)?;
    Ok(value)
}

/// Mini-batch AdamW on `train`, keeping the parameters of the epoch with
/// the lowest validation MSE (earliest on ties).
pub fn train(
    model_cfg: &ModelConfig,
    raster: &RasterConfig,
    cfg: &TrainConfig,
    train: &[Sample],
    val: &[Sample],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Training(
            "train and validation splits must be non-empty".into(),
        ));
    }
    let targets: Vec<_> = train.iter().map(|s| s.target).collect();
    let standardizer = Standardizer::fit(&targets)?;
    let mut model = FusionModel::new(model_cfg.clone(), raster.clone(), cfg.seed)?;
    let mut adam = AdamWState::new(
        AdamWConfig {
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
        &model.store,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            train_step(
                &mut model,
                &mut adam,
                &batch,
                &standardizer,
                cfg.clip_norm,
                dropout_seed(cfg.seed, step),
            )
            .map_err(|e| Error::Training(format!("epoch {epoch}, step {step}: {e}")))?;
            step += 1;
        }
        let train_mse = evaluate_mse(&model, &standardizer, train)?;
        let val_mse = evaluate_mse(&model, &standardizer, val)?;
        if !(train_mse.is_finite() && val_mse.is_finite()) {
            return Err(Error::Training(format!(
                "epoch {epoch}: diverged (train {train_mse}, val {val_mse})"
            )));
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if best.as_ref().is_none_or(|b| val_mse < b.0) {
            best = Some((val_mse, epoch, model.store.clone()));
        }
    }
    let (best_epoch, store) = match best {
        Some((_, e, s)) => (e, s),
        None => (0, model.store.clone()),
    };
    model.store = store;
    Ok(TrainOutcome {
        best: Trained {
            model,
            standardizer,
        },
        best_epoch,
        history,
    })
}

/// Standardizer sidecar next to a checkpoint: `model.ckpt` → `model.standardizer.json`.
pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    ckpt.with_extension("standardizer.json")
}

#[derive(Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub raster: RasterConfig,
    pub train: TrainConfig,
    pub best_epoch: usize,
    /// Dataset the model was trained on.
    pub data: Option<PathBuf>,
}

pub fn save_trained(path: &Path, trained: &Trained, meta: &CheckpointMeta) -> Result<()> {
    checkpoint::save(path, &trained.model.store, &serde_json::to_value(meta)?).map_err(
        |e| match e {
            Error::Io(io) => Error::file(path, io),
            e => e,
        },
    )?;
    trained.standardizer.save(&sidecar_path(path))
}

pub fn load_trained(path: &Path) -> Result<(Trained, CheckpointMeta)> {
    let ckpt = checkpoint::load(path).map_err(|e| match e {
        Error::Io(io) => Error::file(path, io),
        e => e,
    })?;
    let meta: CheckpointMeta = serde_json::from_value(ckpt.meta.clone())
        .map_err(|e| Error::Checkpoint(format!("{}: bad metadata: {e}", path.display())))?;
    let mut model = FusionModel::new(meta.model.clone(), meta.raster.clone(), 0)?;
    ckpt.restore_into(&mut model.store)?;
    Ok((
        Trained {
            model,
            standardizer: Standardizer::load(&sidecar_path(path))?,
        },
        meta,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub cell_type: String,
    /// Raw units, target order.
    pub values: [f64; NUM_TARGETS],
}

/// Eval-mode predictions in raw units, one per sample, in input order.
pub fn predict_all(trained: &Trained, samples: &[Sample]) -> Result<Vec<Prediction>> {
    samples
        .iter()
        .map(|s| {
            let z = trained.model.predict(&s.input)?;
            Ok(Prediction {
                id: s.id.clone(),
                cell_type: s.cell_type.clone(),
                values: trained.standardizer.invert(&z),
            })
        })
        .collect()
}
