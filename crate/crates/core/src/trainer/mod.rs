//! Splitting, target standardization, the training loop, checkpoints and
//! batch prediction.

mod data;
mod split;
mod standardizer;
mod train;

pub use data::{load_samples, LoadStats, Sample};
pub use split::{stratified_split, val_count, Split};
pub use standardizer::Standardizer;
pub use train::{
    batch_loss, evaluate_mse, load_trained, loss_csv, predict_all, save_trained, sidecar_path,
    train, train_step, CheckpointMeta, EpochRecord, Prediction, TrainConfig, TrainOutcome, Trained,
};
