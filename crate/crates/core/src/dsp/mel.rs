use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// HTK mel scale: `2595 · log10(1 + f/700)`.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the half spectrum, `M × (n_fft/2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Matrix,
    sample_rate: u32,
}

impl MelFilterbank {
    /// Filters with centers equally spaced in mel over `[0, sample_rate/2]`.
    /// Filter `m` rises from edge `m` to its peak at edge `m+1` and falls to
    /// zero at edge `m+2`.
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32) -> Result<Self> {
        if n_mels < 2 {
            return Err(Error::BadConfig(format!("need at least 2 mel filters, got {n_mels}")));
        }
        if n_fft < 2 || !n_fft.is_power_of_two() {
            return Err(Error::BadConfig(format!("n_fft {n_fft} is not a power of two")));
        }
        if sample_rate == 0 {
            return Err(Error::BadConfig("sample rate must be positive".into()));
        }
        let nyquist = sample_rate as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64))
            .collect();
        let nb = n_fft / 2 + 1;
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let weights = Matrix::from_fn(n_mels, nb, |m, k| {
            let f = k as f64 * bin_hz;
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let up = (f - lo) / (mid - lo);
            let down = (hi - f) / (hi - mid);
            up.min(down).max(0.0)
        });
        Ok(Self {
            weights,
            sample_rate,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_filters(&self) -> usize {
        self.weights.rows()
    }

    /// Mel energies for one power-spectrum frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights.mul_vec(power)
    }
}

/// Orthonormal DCT-II basis; row `k` holds `s_k · cos(π k (2n+1) / 2N)`.
pub fn dct2_basis(n: usize) -> Matrix {
    let nf = n as f64;
    Matrix::from_fn(n, n, |k, i| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_anchor_points() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        assert!((hz_to_mel(1000.0) - 1000.0).abs() < 0.1);
        for f in [50.0, 440.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn filters_are_unimodal_and_cover_interior_bins() {
        let fb = MelFilterbank::new(40, 2048, 22050).unwrap();
        let w = fb.weights();
        for row in w.iter_rows() {
            assert!(row.iter().all(|&v| v >= 0.0));
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!(row[peak] > 0.0);
            assert!(row[..=peak].windows(2).all(|p| p[0] <= p[1]));
            assert!(row[peak..].windows(2).all(|p| p[0] >= p[1]));
        }
        for k in 1..w.cols() - 1 {
            let total: f64 = (0..w.rows()).map(|m| w.get(m, k)).sum();
            assert!(total > 0.0, "bin {k} uncovered");
        }
    }

    #[test]
    fn bad_configs() {
        assert!(matches!(MelFilterbank::new(1, 2048, 22050), Err(Error::BadConfig(_))));
        assert!(matches!(MelFilterbank::new(40, 1000, 22050), Err(Error::BadConfig(_))));
    }

    #[test]
    fn dct_basis_is_orthonormal() {
        for n in [1, 2, 13, 40, 64] {
            let b = dct2_basis(n);
            let bt = b.transpose();
            for i in 0..n {
                for j in 0..n {
                    let v: f64 = (0..n).map(|k| b.get(i, k) * bt.get(k, j)).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-10, "n={n} ({i},{j}) = {v}");
                }
            }
        }
    }
}
