//! JSON feature files: one record per segment.
//!
//! ```json
//! {"labels": ["car_horn", ...],
//!  "records": [{"clip": "a.wav", "segment": 0, "label": 0, "mfcc": [[...13], ...26]}]}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio_io::{resample_linear, segment_clip, AudioClip, CANONICAL_RATE};
use crate::dsp::{mfcc_sequence, spectral_gate, MfccSequence, FRAMES_PER_SEGMENT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub clip: String,
    pub segment: usize,
    pub label: usize,
    pub mfcc: MfccSequence,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureSet {
    pub labels: Vec<String>,
    pub records: Vec<FeatureRecord>,
}

/// All segments of one clip, in segment order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipGroup<'a> {
    pub clip: &'a str,
    pub label: usize,
    pub segments: Vec<&'a MfccSequence>,
}

impl FeatureSet {
    pub fn new(labels: Vec<String>) -> Self {
        Self {
            labels,
            records: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.labels.iter().enumerate() {
            if self.labels[..i].contains(l) {
                return Err(Error::BadFeatureFile(format!("duplicate label {l:?}")));
            }
        }
        for r in &self.records {
            if r.label >= self.labels.len() {
                return Err(Error::BadFeatureFile(format!(
                    "record {}#{} has label {} but only {} labels exist",
                    r.clip,
                    r.segment,
                    r.label,
                    self.labels.len()
                )));
            }
            if r.mfcc.num_frames() != FRAMES_PER_SEGMENT {
                return Err(Error::BadFeatureFile(format!(
                    "record {}#{} has {} frames, expected {FRAMES_PER_SEGMENT}",
                    r.clip,
                    r.segment,
                    r.mfcc.num_frames()
                )));
            }
        }
        Ok(())
    }

    /// Records grouped by clip id, clips in order of first appearance.
    pub fn clips(&self) -> Vec<ClipGroup<'_>> {
        let mut groups: Vec<(ClipGroup<'_>, Vec<usize>)> = Vec::new();
        for r in &self.records {
            match groups.iter_mut().find(|(g, _)| g.clip == r.clip) {
                Some((g, idx)) => {
                    g.segments.push(&r.mfcc);
                    idx.push(r.segment);
                }
                None => groups.push((
                    ClipGroup {
                        clip: &r.clip,
                        label: r.label,
                        segments: vec![&r.mfcc],
                    },
                    vec![r.segment],
                )),
            }
        }
        groups
            .into_iter()
            .map(|(mut g, idx)| {
                let mut order: Vec<usize> = (0..idx.len()).collect();
                order.sort_by_key(|&i| idx[i]);
                g.segments = order.iter().map(|&i| g.segments[i]).collect();
                g
            })
            .collect()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::BadFeatureFile(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: FeatureSet =
            serde_json::from_str(text).map_err(|e| Error::BadFeatureFile(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Optional denoising applied before segmentation.
#[derive(Debug, Clone, Default)]
pub struct Preprocess {
    pub denoise: bool,
    pub noise_profile: Option<AudioClip>,
}

impl Preprocess {
    pub fn denoised() -> Self {
        Self {
            denoise: true,
            noise_profile: None,
        }
    }
}

/// Resample → optional spectral gate → five segments → MFCCs.
pub fn clip_features(clip: &AudioClip, pre: &Preprocess) -> Result<Vec<MfccSequence>> {
    let mut clip = resample_linear(clip, CANONICAL_RATE)?;
    if pre.denoise {
        let profile = pre
            .noise_profile
            .as_ref()
            .map(|p| resample_linear(p, CANONICAL_RATE))
            .transpose()?;
        clip = spectral_gate(&clip, profile.as_ref())?;
    }
    segment_clip(&clip)?.iter().map(mfcc_sequence).collect()
}
