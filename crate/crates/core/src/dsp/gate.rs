//! Spectral gating: bins that stay under a per-frequency noise floor are
//! attenuated, the resulting mask is smoothed, and the signal is resynthesized.

use super::stft::{magnitude, StftPlan};
use crate::audio_io::AudioClip;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    pub n_fft: usize,
    pub hop: usize,
    /// Floor = mean + `threshold_sigmas` · std of the noise profile per bin.
    pub threshold_sigmas: f64,
    /// Percentile of the clip's own magnitudes used when no profile is given.
    pub self_percentile: f64,
    /// Gain applied to gated bins, in dB.
    pub floor_db: f64,
    /// Mask smoothing half-widths.
    pub smooth_frames: usize,
    pub smooth_bins: usize,
}

impl Default for GateParams {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            hop: 512,
            threshold_sigmas: 1.5,
            self_percentile: 10.0,
            floor_db: -30.0,
            smooth_frames: 2,
            smooth_bins: 2,
        }
    }
}

/// Denoises `clip` with the default [`GateParams`].
pub fn spectral_gate(clip: &AudioClip, noise_profile: Option<&AudioClip>) -> Result<AudioClip> {
    spectral_gate_with(clip, noise_profile, &GateParams::default())
}

pub fn spectral_gate_with(
    clip: &AudioClip,
    noise_profile: Option<&AudioClip>,
    params: &GateParams,
) -> Result<AudioClip> {
    if let Some(noise) = noise_profile {
        if noise.sample_rate() != clip.sample_rate() {
            return Err(Error::RateMismatch(clip.sample_rate(), noise.sample_rate()));
        }
    }
    if clip.is_empty() {
        return Ok(clip.clone());
    }
    let plan = StftPlan::new(params.n_fft, params.hop)?;
    let mut spec = plan.stft(clip.samples())?;
    let mags = magnitude(&spec);

    let floor = match noise_profile {
        Some(noise) => profile_floor(&magnitude(&plan.stft(noise.samples())?), params.threshold_sigmas),
        None => percentile_floor(&mags, params.self_percentile),
    };

    let gain = 10f64.powf(params.floor_db / 20.0);
    let raw = Matrix::from_fn(mags.rows(), mags.cols(), |f, k| {
        if mags.get(f, k) > floor[k] {
            1.0
        } else {
            gain
        }
    });
    let mask = box_smooth(&raw, params.smooth_frames, params.smooth_bins);

    for (z, &m) in spec.bins_mut().iter_mut().zip(mask.as_slice()) {
        *z *= m;
    }
    AudioClip::new(plan.istft(&spec)?, clip.sample_rate())
}

/// Per-bin `mean + sigmas · std` (population std) over frames.
fn profile_floor(mags: &Matrix, sigmas: f64) -> Vec<f64> {
    let frames = mags.rows() as f64;
    (0..mags.cols())
        .map(|k| {
            let mean = (0..mags.rows()).map(|f| mags.get(f, k)).sum::<f64>() / frames;
            let var = (0..mags.rows())
                .map(|f| (mags.get(f, k) - mean).powi(2))
                .sum::<f64>()
                / frames;
            mean + sigmas * var.sqrt()
        })
        .collect()
}

/// Per-bin percentile over frames, linearly interpolated between ranks.
fn percentile_floor(mags: &Matrix, pct: f64) -> Vec<f64> {
    let mut column = vec![0.0; mags.rows()];
    (0..mags.cols())
        .map(|k| {
            for (f, c) in column.iter_mut().enumerate() {
                *c = mags.get(f, k);
            }
            percentile(&mut column, pct)
        })
        .collect()
}

pub(crate) fn percentile(values: &mut [f64], pct: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let rank = (pct / 100.0).clamp(0.0, 1.0) * (values.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    values[lo] + (values[hi] - values[lo]) * (rank - lo as f64)
}

/// Moving average over a `(2·df+1) × (2·db+1)` window, truncated at edges.
fn box_smooth(m: &Matrix, df: usize, db: usize) -> Matrix {
    let (rows, cols) = m.shape();
    Matrix::from_fn(rows, cols, |f, k| {
        let (f0, f1) = (f.saturating_sub(df), (f + df).min(rows - 1));
        let (k0, k1) = (k.saturating_sub(db), (k + db).min(cols - 1));
        let mut sum = 0.0;
        for ff in f0..=f1 {
            sum += m.row(ff)[k0..=k1].iter().sum::<f64>();
        }
        sum / ((f1 - f0 + 1) * (k1 - k0 + 1)) as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_stays_silent() {
        let clip = AudioClip::new(vec![0.0; 8000], 22050).unwrap();
        let out = spectral_gate(&clip, None).unwrap();
        assert_eq!(out.len(), clip.len());
        assert!(out.samples().iter().all(|&s| s == 0.0));
        let noise = AudioClip::new(vec![0.0; 4000], 22050).unwrap();
        let out = spectral_gate(&clip, Some(&noise)).unwrap();
        assert!(out.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn rate_mismatch() {
        let clip = AudioClip::new(vec![0.0; 100], 22050).unwrap();
        let noise = AudioClip::new(vec![0.0; 100], 44100).unwrap();
        assert!(matches!(
            spectral_gate(&clip, Some(&noise)),
            Err(Error::RateMismatch(22050, 44100))
        ));
    }

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0, 0.0];
        assert_eq!(percentile(&mut v, 50.0), 2.0);
        assert!((percentile(&mut v, 10.0) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn box_smooth_of_constant_is_constant() {
        let m = Matrix::from_fn(7, 9, |_, _| 0.3);
        let s = box_smooth(&m, 2, 2);
        assert!(s.as_slice().iter().all(|&v| (v - 0.3).abs() < 1e-15));
    }
}
