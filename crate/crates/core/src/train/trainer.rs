use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::backprop::{backprop_batch, clip_global_norm, cross_entropy};
use super::calibrate::ClassThresholds;
use super::norm::{apply_norm, fit_norm_stats};
use crate::dsp::{FRAMES_PER_SEGMENT, N_MFCC};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::grnn::{FastGrnn, ModelConfig};
use crate::matrix::Matrix;
use crate::model_store::ModelBundle;

/// Threshold written into freshly trained bundles, before calibration.
pub const UNCALIBRATED_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub rng_seed: u64,
    /// Fraction of clips used for training; the rest validate.
    pub train_fraction: f64,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    /// Global gradient-norm cap applied before each Adam step.
    pub clip_norm: f64,
    pub hidden_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            max_epochs: 200,
            rng_seed: 42,
            train_fraction: 0.8,
            patience: 10,
            clip_norm: 5.0,
            hidden_dim: 26,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.train_fraction > 0.0
            && self.train_fraction < 1.0
            && self.clip_norm > 0.0
            && self.hidden_dim > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::BadConfig(format!("invalid training config {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the whole training split at the end of the epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub history: Vec<EpochStats>,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub train_clips: Vec<String>,
    pub validation_clips: Vec<String>,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochStats {
        &self.history[self.best_epoch - 1]
    }
}

type Labeled = (Matrix, usize);

fn evaluate(model: &FastGrnn, data: &[Labeled]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (seq, label) in data {
        let p = model.predict(seq)?;
        loss += cross_entropy(&p, *label)?;
        correct += usize::from(p.argmax() == *label);
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Splits by clip, normalizes with train-split statistics, then runs
/// minibatch Adam over BPTT gradients with early stopping on validation loss.
/// The returned bundle holds the best-validation parameters.
pub fn train_model(config: &TrainConfig, dataset: &FeatureSet) -> Result<TrainOutcome> {
    config.validate()?;
    dataset.validate()?;
    if dataset.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let first = dataset.records[0].label;
    if dataset.records.iter().all(|r| r.label == first) {
        return Err(Error::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut clips: Vec<&str> = Vec::new();
    for r in &dataset.records {
        if !clips.contains(&r.clip.as_str()) {
            clips.push(&r.clip);
        }
    }
    clips.shuffle(&mut rng);
    let n_train = if clips.len() < 2 {
        clips.len()
    } else {
        ((clips.len() as f64 * config.train_fraction).round() as usize).clamp(1, clips.len() - 1)
    };
    let (train_ids, val_ids) = clips.split_at(n_train);

    let pick = |ids: &[&str]| -> Vec<&crate::features::FeatureRecord> {
        dataset
            .records
            .iter()
            .filter(|r| ids.contains(&r.clip.as_str()))
            .collect()
    };
    let train_recs = pick(train_ids);
    let val_recs = if val_ids.is_empty() { train_recs.clone() } else { pick(val_ids) };

    let norm = fit_norm_stats(train_recs.iter().map(|r| &r.mfcc))?;
    let prepare = |recs: &[&crate::features::FeatureRecord]| -> Result<Vec<Labeled>> {
        recs.iter()
            .map(|r| Ok((apply_norm(&norm, r.mfcc.as_matrix())?, r.label)))
            .collect()
    };
    let train = prepare(&train_recs)?;
    let val = prepare(&val_recs)?;

    let model_config = ModelConfig {
        input_dim: N_MFCC,
        hidden_dim: config.hidden_dim,
        num_classes: dataset.num_classes(),
        seq_len: FRAMES_PER_SEGMENT,
    };
    let (model, history, best_epoch) = fit(config, &model_config, &train, &val, &mut rng)?;

    let bundle = ModelBundle::new(
        model_config,
        model,
        norm,
        ClassThresholds::constant(model_config.num_classes, UNCALIBRATED_THRESHOLD),
        dataset.labels.clone(),
    )?;
    Ok(TrainOutcome {
        bundle,
        history,
        best_epoch,
        train_clips: train_ids.iter().map(|s| s.to_string()).collect(),
        validation_clips: val_ids.iter().map(|s| s.to_string()).collect(),
    })
}

/// Training loop over already-normalized sequences.
pub fn fit(
    config: &TrainConfig,
    model_config: &ModelConfig,
    train: &[Labeled],
    val: &[Labeled],
    rng: &mut ChaCha8Rng,
) -> Result<(FastGrnn, Vec<EpochStats>, usize)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = FastGrnn::init(model_config, rng);
    let mut adam = Adam::new(config.adam(), &model);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut batch: Vec<(&Matrix, usize)> = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.max_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (&train[i].0, train[i].1)));
            let mut g = backprop_batch(&model, &batch)?.grads;
            clip_global_norm(&mut g, config.clip_norm);
            adam.step(&mut model, &g)?;
        }
        let (train_loss, _) = evaluate(&model, train)?;
        let (val_loss, val_accuracy) = evaluate(&model, val)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
        } else if epoch - best.1 >= config.patience {
            break;
        }
    }
    Ok((best.2, history, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::MfccSequence;
    use crate::features::FeatureRecord;

    fn toy_set(classes: usize, clips_per_class: usize) -> FeatureSet {
        let mut set = FeatureSet::new((0..classes).map(|c| format!("c{c}")).collect());
        for c in 0..classes {
            for k in 0..clips_per_class {
                let mfcc = Matrix::from_fn(26, 13, |r, j| {
                    let base = if j == c { 3.0 } else { 0.0 };
                    base + (((r * 7 + j * 3 + k * 11) % 13) as f64 - 6.0) * 0.05
                });
                set.records.push(FeatureRecord {
                    clip: format!("c{c}_{k}"),
                    segment: 0,
                    label: c,
                    mfcc: MfccSequence::new(mfcc).unwrap(),
                });
            }
        }
        set
    }

    #[test]
    fn refuses_degenerate_datasets() {
        let cfg = TrainConfig::default();
        assert!(matches!(train_model(&cfg, &FeatureSet::new(vec!["a".into()])), Err(Error::EmptyDataset)));
        assert!(matches!(train_model(&cfg, &toy_set(1, 3)), Err(Error::SingleClass)));
    }

    #[test]
    fn learns_a_trivially_separable_set() {
        let cfg = TrainConfig {
            max_epochs: 40,
            learning_rate: 1e-2,
            hidden_dim: 8,
            ..TrainConfig::default()
        };
        let out = train_model(&cfg, &toy_set(3, 10)).unwrap();
        assert!(out.best().val_accuracy > 0.99, "{:?}", out.best());
        assert!(out.validation_clips.iter().all(|c| !out.train_clips.contains(c)));
    }
}
