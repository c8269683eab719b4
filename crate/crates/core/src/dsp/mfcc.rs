use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::mel::{dct2_basis, MelFilterbank};
use super::stft::{power_spectrum, StftPlan};
use crate::audio_io::{Segment, CANONICAL_RATE};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Cepstral coefficients kept per frame.
pub const N_MFCC: usize = 13;
/// Frames produced by one canonical segment.
pub const FRAMES_PER_SEGMENT: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_coeffs: usize,
    pub sample_rate: u32,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            n_mels: 40,
            n_coeffs: N_MFCC,
            sample_rate: CANONICAL_RATE,
            log_floor: 1e-10,
        }
    }
}

/// A `T × 13` matrix of cepstral coefficients, one row per STFT frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct MfccSequence(Matrix);

impl MfccSequence {
    pub fn new(coeffs: Matrix) -> Result<Self> {
        if coeffs.cols() != N_MFCC {
            return Err(Error::DimensionMismatch(format!(
                "MFCC frames must have {N_MFCC} coefficients, got {}",
                coeffs.cols()
            )));
        }
        Ok(Self(coeffs))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn num_frames(&self) -> usize {
        self.0.rows()
    }
}

impl AsRef<Matrix> for MfccSequence {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for MfccSequence {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(&rows)?)
    }
}

impl From<MfccSequence> for Vec<Vec<f64>> {
    fn from(seq: MfccSequence) -> Self {
        seq.0.iter_rows().map(<[f64]>::to_vec).collect()
    }
}

/// STFT → power → mel → log → DCT-II pipeline with precomputed tables.
/// Immutable once built; share freely across threads.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    plan: StftPlan,
    filterbank: MelFilterbank,
    dct: Matrix,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        if config.n_coeffs == 0 || config.n_coeffs > config.n_mels {
            return Err(Error::BadConfig(format!(
                "cannot keep {} coefficients from {} mel bands",
                config.n_coeffs, config.n_mels
            )));
        }
        Ok(Self {
            plan: StftPlan::new(config.n_fft, config.hop)?,
            filterbank: MelFilterbank::new(config.n_mels, config.n_fft, config.sample_rate)?,
            dct: dct2_basis(config.n_mels),
            config,
        })
    }

    /// Process-wide extractor for the default configuration.
    pub fn canonical() -> &'static MfccExtractor {
        static CANONICAL: OnceLock<MfccExtractor> = OnceLock::new();
        CANONICAL.get_or_init(|| MfccExtractor::new(MfccConfig::default()).expect("default config is valid"))
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// `frames × n_coeffs` coefficients for an arbitrary signal.
    pub fn coefficients(&self, samples: &[f64]) -> Result<Matrix> {
        let power = power_spectrum(&self.plan.stft(samples)?);
        let keep = self.config.n_coeffs;
        let mut out = Matrix::zeros(power.rows(), keep);
        let mut log_mel = vec![0.0; self.config.n_mels];
        for (f, frame) in power.iter_rows().enumerate() {
            for (l, e) in log_mel.iter_mut().zip(self.filterbank.apply(frame)) {
                *l = (e + self.config.log_floor).ln();
            }
            for (k, c) in out.row_mut(f).iter_mut().enumerate() {
                *c = crate::matrix::dot(self.dct.row(k), &log_mel);
            }
        }
        Ok(out)
    }
}

/// The network input for one segment: 26 frames of 13 coefficients.
pub fn mfcc_sequence(segment: &Segment) -> Result<MfccSequence> {
    MfccSequence::new(MfccExtractor::canonical().coefficients(segment.samples())?)
}
