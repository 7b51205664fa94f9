use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use fusioncell::config::{Config, ExplicitSeeds};
use fusioncell::fusion::{attention_dump, Variant};
use fusioncell::metrics::{evaluate, Averaging, EvalRow};
use fusioncell::synth::{build_dataset, Dataset};
use fusioncell::trainer::{
    load_samples, load_trained, loss_csv, predict_all, save_trained, sidecar_path,
    stratified_split, train as fit, CheckpointMeta,
};

use crate::run::{env_seed, resolve_seed, RunManifest};

fn load_config(path: Option<&Path>) -> Result<(Config, ExplicitSeeds)> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok((Config::default(), ExplicitSeeds::default())),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn print_config(path: Option<&Path>) -> Result<()> {
    print!("{}", load_config(path)?.0.to_toml());
    Ok(())
}

#[derive(Args)]
pub struct GenArgs {
    /// TOML configuration; the [synth] table is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output dataset directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

pub fn gen(a: GenArgs) -> Result<()> {
    let (mut cfg, explicit) = load_config(a.config.as_deref())?;
    let default = cfg.synth.seed;
    let (seed, source) = resolve_seed(
        explicit.synth.then_some(cfg.synth.seed),
        env_seed().as_deref(),
        a.seed,
        default,
    )?;
    cfg.synth.seed = seed;
    create_dir(&a.out)?;
    let mut run = RunManifest::new("gen", &cfg, seed, source).output("dataset", &a.out);
    if let Some(c) = &a.config {
        run = run.input("config", c);
    }
    run.write(&a.out.join("run.json"))?;
    let m = build_dataset(&cfg.synth, &a.out)?;
    println!(
        "wrote {} cells of {} types to {}",
        m.entries.len(),
        m.cell_types().len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// fusioncell, fusioncell_no_corr, vision_only, late_fusion or symmetrical.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Clip the global gradient norm to this value.
    #[arg(long)]
    clip_norm: Option<f64>,
    /// TOML configuration; [raster], [model] and [train] are used.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (mut cfg, explicit) = load_config(a.config.as_deref())?;
    if let Some(v) = &a.variant {
        cfg.model.variant = Variant::parse(v)?;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(b) = a.batch {
        cfg.train.batch_size = b;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if a.clip_norm.is_some() {
        cfg.train.clip_norm = a.clip_norm;
    }
    let default = cfg.train.seed;
    let (seed, source) = resolve_seed(
        explicit.train.then_some(cfg.train.seed),
        env_seed().as_deref(),
        a.seed,
        default,
    )?;
    cfg.train.seed = seed;
    cfg.validate()?;

    create_dir(&a.out)?;
    let ckpt = a.out.join("model.ckpt");
    let losses = a.out.join("loss.csv");
    let mut run = RunManifest::new("train", &cfg, seed, source)
        .input("data", &a.data)
        .output("checkpoint", &ckpt)
        .output("standardizer", &sidecar_path(&ckpt))
        .output("losses", &losses);
    if let Some(c) = &a.config {
        run = run.input("config", c);
    }
    run.write(&a.out.join("run.json"))?;

    let data = Dataset::open(&a.data)?;
    let split = stratified_split(&data.manifest.entries, cfg.train.val_ratio, seed)?;
    let variant = cfg.model.variant;
    let (train_set, stats) = load_samples(&data, &split.train, &cfg.raster, variant)?;
    let (val_set, _) = load_samples(&data, &split.val, &cfg.raster, variant)?;
    eprintln!(
        "training {variant} on {} cells ({} netlists read), validating on {}",
        train_set.len(),
        stats.netlists_read,
        val_set.len()
    );
    let out = fit(&cfg.model, &cfg.raster, &cfg.train, &train_set, &val_set)?;
    write(&losses, &loss_csv(&out.history))?;
    let meta = CheckpointMeta {
        model: cfg.model.clone(),
        raster: cfg.raster.clone(),
        train: cfg.train.clone(),
        best_epoch: out.best_epoch,
        data: Some(a.data.clone()),
    };
    save_trained(&ckpt, &out.best, &meta)?;
    if let Some(best) = out.history.iter().find(|r| r.epoch == out.best_epoch) {
        println!(
            "best epoch {} (train mse {:.6}, val mse {:.6}); checkpoint {}",
            best.epoch,
            best.train_mse,
            best.val_mse,
            ckpt.display()
        );
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    All,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    ckpt: PathBuf,
    /// JSON report path; the text table goes next to it with a .txt extension.
    #[arg(long)]
    report: PathBuf,
    /// Cells to evaluate, using the split recorded in the checkpoint.
    #[arg(long, value_enum, default_value = "val")]
    split: SplitArg,
    /// Weight per-type ranking averages by type size.
    #[arg(long)]
    micro: bool,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    if !sidecar_path(&a.ckpt).is_file() {
        bail!(
            "standardizer sidecar {} is missing",
            sidecar_path(&a.ckpt).display()
        );
    }
    let (trained, meta) = load_trained(&a.ckpt)?;
    let data = Dataset::open(&a.data)?;
    let ids = match a.split {
        SplitArg::All => data.manifest.entries.iter().map(|e| e.id.clone()).collect(),
        s => {
            let split = stratified_split(
                &data.manifest.entries,
                meta.train.val_ratio,
                meta.train.seed,
            )?;
            if s == SplitArg::Train {
                split.train
            } else {
                split.val
            }
        }
    };
    let (samples, _) = load_samples(&data, &ids, &meta.raster, meta.model.variant)?;
    let preds = predict_all(&trained, &samples)?;
    let rows: Vec<EvalRow> = preds
        .iter()
        .zip(&samples)
        .map(|(p, s)| EvalRow {
            cell_type: s.cell_type.clone(),
            pred: p.values,
            truth: s.target,
        })
        .collect();
    let averaging = if a.micro {
        Averaging::Micro
    } else {
        Averaging::Macro
    };
    let label = format!("{} / {:?}", meta.model.variant, a.split).to_lowercase();
    let report = evaluate(&label, &rows, averaging)?;
    if let Some(dir) = a.report.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write(&a.report, &report.to_json())?;
    let table = report.to_table();
    write(&a.report.with_extension("txt"), &table)?;
    print!("{table}");
    Ok(())
}

#[derive(Args)]
pub struct AttnArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    cell: String,
    #[arg(long)]
    out: PathBuf,
    /// Dataset directory; defaults to the one recorded in the checkpoint.
    #[arg(long)]
    data: Option<PathBuf>,
}

pub fn attn(a: AttnArgs) -> Result<()> {
    let (trained, meta) = load_trained(&a.ckpt)?;
    let dir = a
        .data
        .or(meta.data)
        .context("checkpoint does not record its dataset; pass --data")?;
    let data = Dataset::open(&dir)?;
    let (samples, _) = load_samples(
        &data,
        std::slice::from_ref(&a.cell),
        &meta.raster,
        meta.model.variant,
    )?;
    let dump = attention_dump(&trained.model, &samples[0].input)?;
    write(&a.out, &(serde_json::to_string_pretty(&dump)? + "\n"))?;
    println!(
        "wrote {} attention rows to {}",
        dump.rows.len(),
        a.out.display()
    );
    Ok(())
}
