//! Supervised training: Z-score normalization, cross-entropy, BPTT, Adam,
//! and per-class threshold calibration.

mod adam;
mod backprop;
mod calibrate;
mod norm;
mod trainer;

pub use adam::{adam_step, Adam, AdamConfig};
pub use backprop::{backprop_batch, batch_loss, clip_global_norm, cross_entropy, BatchGradient, PROB_FLOOR};
pub use calibrate::{calibrate_thresholds, thresholds_from_aggregates, CalibrationClip, ClassThresholds};
pub use norm::{apply_norm, fit_norm_stats, NormStats, STD_FLOOR};
pub use trainer::{fit, train_model, EpochStats, TrainConfig, TrainOutcome, UNCALIBRATED_THRESHOLD};
