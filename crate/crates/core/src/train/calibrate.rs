use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsp::MfccSequence;
use crate::error::{Error, Result};
use crate::eval::predict_segments;
use crate::grnn::ClassProbs;
use crate::model_store::ModelBundle;

/// Per-class presence thresholds in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassThresholds(Vec<f64>);

impl ClassThresholds {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if let Some(t) = tau.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::BadConfig(format!("threshold {t} outside [0, 1]")));
        }
        Ok(Self(tau))
    }

    pub fn constant(num_classes: usize, value: f64) -> Self {
        Self(vec![value.clamp(0.0, 1.0); num_classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A clip for calibration: raw (unnormalized) segment features and the set of
/// classes known to occur in it.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationClip {
    pub segments: Vec<MfccSequence>,
    pub classes: BTreeSet<usize>,
}

/// `tau[c]` = mean aggregate probability of `c` over the clips containing `c`.
pub fn thresholds_from_aggregates(
    clips: &[(ClassProbs, BTreeSet<usize>)],
    num_classes: usize,
) -> Result<ClassThresholds> {
    let mut sum = vec![0.0; num_classes];
    let mut count = vec![0usize; num_classes];
    for (probs, classes) in clips {
        if probs.len() != num_classes {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {num_classes} classes",
                probs.len()
            )));
        }
        for &c in classes {
            if c >= num_classes {
                return Err(Error::BadLabel {
                    label: c,
                    classes: num_classes,
                });
            }
            sum[c] += probs.as_slice()[c];
            count[c] += 1;
        }
    }
    let tau = sum
        .iter()
        .zip(&count)
        .enumerate()
        .map(|(c, (&s, &n))| if n == 0 { Err(Error::MissingClass(c)) } else { Ok(s / n as f64) })
        .collect::<Result<Vec<_>>>()?;
    ClassThresholds::new(tau)
}

/// Runs the model over every clip and averages per-class probabilities.
pub fn calibrate_thresholds(model: &ModelBundle, clips: &[CalibrationClip]) -> Result<ClassThresholds> {
    let aggregates = clips
        .iter()
        .map(|clip| Ok((predict_segments(model, &clip.segments)?.aggregate, clip.classes.clone())))
        .collect::<Result<Vec<_>>>()?;
    thresholds_from_aggregates(&aggregates, model.config.num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(p: &[f64]) -> ClassProbs {
        ClassProbs::new(p.to_vec()).unwrap()
    }

    #[test]
    fn averages_where_present() {
        let clips = vec![
            (probs(&[0.8, 0.2]), BTreeSet::from([0])),
            (probs(&[0.6, 0.4]), BTreeSet::from([0, 1])),
        ];
        let t = thresholds_from_aggregates(&clips, 2).unwrap();
        assert!((t.as_slice()[0] - 0.7).abs() < 1e-15);
        assert_eq!(t.as_slice()[1], 0.4);
    }

    #[test]
    fn missing_class() {
        let clips = vec![(probs(&[0.8, 0.2, 0.0]), BTreeSet::from([0, 1]))];
        assert!(matches!(thresholds_from_aggregates(&clips, 3), Err(Error::MissingClass(2))));
    }

    #[test]
    fn range_check() {
        assert!(ClassThresholds::new(vec![0.0, 1.0]).is_ok());
        assert!(ClassThresholds::new(vec![1.5]).is_err());
    }
}
