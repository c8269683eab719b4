//! Clip-level inference, multi-tone detection and classification metrics.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::audio_io::AudioClip;
use crate::error::{Error, Result};
use crate::features::{clip_features, FeatureSet, Preprocess};
use crate::grnn::ClassProbs;
use crate::matrix::Matrix;
use crate::model_store::ModelBundle;
use crate::train::{apply_norm, ClassThresholds};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipPrediction {
    pub per_segment: Vec<ClassProbs>,
    /// Arithmetic mean of the segment distributions.
    pub aggregate: ClassProbs,
    pub predicted_class: usize,
    pub present_classes: BTreeSet<usize>,
}

/// Normalizes and classifies each segment, then averages the distributions.
pub fn predict_segments<S: AsRef<Matrix>>(model: &ModelBundle, segments: &[S]) -> Result<ClipPrediction> {
    let per_segment = segments
        .iter()
        .map(|s| model.model.predict(&apply_norm(&model.norm, s.as_ref())?))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = ClassProbs::mean(&per_segment)?;
    Ok(ClipPrediction {
        predicted_class: aggregate.argmax(),
        present_classes: detect_present_classes(&aggregate, &model.thresholds),
        per_segment,
        aggregate,
    })
}

/// Full pipeline from raw audio, optionally spectral-gated first.
pub fn infer_clip(model: &ModelBundle, clip: &AudioClip, denoise: bool) -> Result<ClipPrediction> {
    let pre = if denoise { Preprocess::denoised() } else { Preprocess::default() };
    infer_clip_with(model, clip, &pre)
}

pub fn infer_clip_with(model: &ModelBundle, clip: &AudioClip, pre: &Preprocess) -> Result<ClipPrediction> {
    predict_segments(model, &clip_features(clip, pre)?)
}

/// `{c : aggregate[c] ≥ tau[c]}`.
pub fn detect_present_classes(aggregate: &ClassProbs, thresholds: &ClassThresholds) -> BTreeSet<usize> {
    aggregate
        .as_slice()
        .iter()
        .zip(thresholds.as_slice())
        .enumerate()
        .filter(|(_, (p, t))| p >= t)
        .map(|(c, _)| c)
        .collect()
}

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.num_classes())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion_matrix(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch(predictions.len(), labels.len()));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &t) in predictions.iter().zip(labels) {
        for index in [p, t] {
            if index >= num_classes {
                return Err(Error::BadIndex {
                    index,
                    classes: num_classes,
                });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy and per-class precision/recall; `0/0` is reported as 0.
pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let rows = cm.row_sums();
    let cols = cm.col_sums();
    let diag = |i: usize| cm.counts[i][i];
    Ok(Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision: (0..cm.num_classes()).map(|i| ratio(diag(i), cols[i])).collect(),
        recall: (0..cm.num_classes()).map(|i| ratio(diag(i), rows[i])).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub labels: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

/// Clip-level evaluation of a feature file. Feature labels are matched to
/// model labels by name.
pub fn evaluate_features(model: &ModelBundle, features: &FeatureSet) -> Result<Evaluation> {
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for clip in features.clips() {
        let name = &features.labels[clip.label];
        let label = model
            .labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::BadFeatureFile(format!("label {name:?} unknown to the model")))?;
        preds.push(predict_segments(model, &clip.segments)?.predicted_class);
        truth.push(label);
    }
    let confusion = confusion_matrix(&preds, &truth, model.config.num_classes)?;
    Ok(Evaluation {
        labels: model.labels.clone(),
        metrics: metrics(&confusion)?,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(p: &[f64]) -> ClassProbs {
        ClassProbs::new(p.to_vec()).unwrap()
    }

    #[test]
    fn presence_rule() {
        let agg = probs(&[0.5, 0.3, 0.1, 0.05, 0.03, 0.02]);
        let t = ClassThresholds::constant(6, 0.25);
        assert_eq!(detect_present_classes(&agg, &t), BTreeSet::from([0, 1]));
        assert!(detect_present_classes(&agg, &ClassThresholds::constant(6, 0.9)).is_empty());
        let tie = ClassThresholds::new(vec![0.5, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(detect_present_classes(&agg, &tie), BTreeSet::from([0]));
    }

    #[test]
    fn confusion_cases() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.trace(), 3);
        let cm = confusion_matrix(&[0, 0, 0], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.col_sums(), vec![3, 0, 0]);
        assert!(matches!(confusion_matrix(&[0], &[0, 1], 2), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(confusion_matrix(&[5], &[0], 2), Err(Error::BadIndex { index: 5, .. })));
    }

    #[test]
    fn metric_arithmetic() {
        let cm = ConfusionMatrix {
            counts: vec![vec![1, 1], vec![0, 2]],
        };
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.recall[0], 0.5);
        assert_eq!(m.precision[1], 2.0 / 3.0);
        let never_predicted = ConfusionMatrix {
            counts: vec![vec![0, 2], vec![0, 2]],
        };
        assert_eq!(metrics(&never_predicted).unwrap().precision[0], 0.0);
        let empty = ConfusionMatrix {
            counts: vec![vec![0; 2]; 2],
        };
        assert!(matches!(metrics(&empty), Err(Error::EmptyMatrix)));
    }
}
