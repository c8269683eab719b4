use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Half-spectrum STFT frames, `F × (n_fft/2 + 1)` complex bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Vec<Complex64>,
    num_frames: usize,
    n_fft: usize,
    hop: usize,
    signal_len: usize,
}

impl Spectrogram {
    /// Assembles a spectrogram from raw parts. Geometry is checked by
    /// [`istft`], not here, so tests can build deliberately broken ones.
    pub fn from_parts(
        bins: Vec<Complex64>,
        num_frames: usize,
        n_fft: usize,
        hop: usize,
        signal_len: usize,
    ) -> Self {
        Self {
            bins,
            num_frames,
            n_fft,
            hop,
            signal_len,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// Length of the signal the frames were computed from.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn frame(&self, f: usize) -> &[Complex64] {
        let b = self.num_bins();
        &self.bins[f * b..(f + 1) * b]
    }

    pub fn frame_mut(&mut self, f: usize) -> &mut [Complex64] {
        let b = self.num_bins();
        &mut self.bins[f * b..(f + 1) * b]
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Frame count for a centered STFT.
pub fn frame_count(signal_len: usize, hop: usize) -> usize {
    1 + signal_len / hop
}

// Mirror index into [0, len) without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as isize {
        m = period - m;
    }
    m as usize
}

fn check_geometry(n_fft: usize, hop: usize) -> Result<()> {
    if n_fft < 2 || !n_fft.is_power_of_two() {
        return Err(Error::BadFftSize(n_fft));
    }
    if hop == 0 || hop > n_fft {
        return Err(Error::BadConfig(format!("hop {hop} must be in 1..={n_fft}")));
    }
    Ok(())
}

/// Reusable forward/inverse transform for one `(n_fft, hop)` geometry.
#[derive(Clone)]
pub struct StftPlan {
    n_fft: usize,
    hop: usize,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftPlan")
            .field("n_fft", &self.n_fft)
            .field("hop", &self.hop)
            .finish()
    }
}

impl StftPlan {
    pub fn new(n_fft: usize, hop: usize) -> Result<Self> {
        check_geometry(n_fft, hop)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_fft,
            hop,
            window: hann(n_fft),
            forward: planner.plan_fft_forward(n_fft),
            inverse: planner.plan_fft_inverse(n_fft),
        })
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Centered (reflect-padded) Hann-windowed STFT.
    pub fn stft(&self, samples: &[f64]) -> Result<Spectrogram> {
        if samples.is_empty() {
            return Err(Error::EmptySignal);
        }
        let n = self.n_fft;
        let half = (n / 2) as isize;
        let frames = frame_count(samples.len(), self.hop);
        let nb = n / 2 + 1;
        let mut bins = Vec::with_capacity(frames * nb);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for f in 0..frames {
            let start = (f * self.hop) as isize - half;
            for (j, slot) in buf.iter_mut().enumerate() {
                let s = samples[reflect(start + j as isize, samples.len())];
                *slot = Complex64::new(s * self.window[j], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            bins.extend_from_slice(&buf[..nb]);
        }
        Ok(Spectrogram {
            bins,
            num_frames: frames,
            n_fft: n,
            hop: self.hop,
            signal_len: samples.len(),
        })
    }

    /// Weighted overlap-add inverse: each frame is Hann-windowed again and
    /// the sum is divided by the accumulated squared window.
    pub fn istft(&self, spec: &Spectrogram) -> Result<Vec<f64>> {
        if spec.n_fft != self.n_fft || spec.hop != self.hop {
            return Err(Error::InconsistentGeometry(format!(
                "plan is n_fft={} hop={}, spectrogram is n_fft={} hop={}",
                self.n_fft, self.hop, spec.n_fft, spec.hop
            )));
        }
        let n = self.n_fft;
        let nb = n / 2 + 1;
        if spec.signal_len == 0
            || spec.num_frames != frame_count(spec.signal_len, spec.hop)
            || spec.bins.len() != spec.num_frames * nb
        {
            return Err(Error::InconsistentGeometry(format!(
                "{} frames / {} bins for a {}-sample signal",
                spec.num_frames,
                spec.bins.len(),
                spec.signal_len
            )));
        }
        let padded_len = spec.signal_len + n;
        let mut out = vec![0.0; padded_len];
        let mut norm = vec![0.0; padded_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for f in 0..spec.num_frames {
            let frame = spec.frame(f);
            buf[..nb].copy_from_slice(frame);
            for k in 1..n / 2 {
                buf[n - k] = frame[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = f * self.hop;
            for j in 0..n {
                let w = self.window[j];
                out[start + j] += buf[j].re / n as f64 * w;
                norm[start + j] += w * w;
            }
        }
        let offset = n / 2;
        Ok((offset..offset + spec.signal_len)
            .map(|i| {
                if norm[i] > 1e-10 {
                    out[i] / norm[i]
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// One-shot [`StftPlan::stft`].
pub fn stft(samples: &[f64], n_fft: usize, hop: usize) -> Result<Spectrogram> {
    StftPlan::new(n_fft, hop)?.stft(samples)
}

/// One-shot [`StftPlan::istft`] for the spectrogram's own geometry.
pub fn istft(spec: &Spectrogram) -> Result<Vec<f64>> {
    StftPlan::new(spec.n_fft, spec.hop)
        .map_err(|e| Error::InconsistentGeometry(e.to_string()))?
        .istft(spec)
}

/// Element-wise `|z|²`.
pub fn power_spectrum(spec: &Spectrogram) -> Matrix {
    let data = spec.bins.iter().map(|z| z.norm_sqr()).collect();
    Matrix::from_vec(spec.num_frames, spec.num_bins(), data).expect("shape from spectrogram")
}

/// Element-wise `|z|`.
pub fn magnitude(spec: &Spectrogram) -> Matrix {
    let data = spec.bins.iter().map(|z| z.norm()).collect();
    Matrix::from_vec(spec.num_frames, spec.num_bins(), data).expect("shape from spectrogram")
}
