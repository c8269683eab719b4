//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's DSP or network code paths.
#![allow(dead_code)]

use std::f64::consts::PI;

/// `(re, im)` pairs.
pub type C = (f64, f64);

/// O(N²) DFT of a real frame, bins `0..=n/2`.
pub fn direct_dft_half(frame: &[f64]) -> Vec<C> {
    let n = frame.len();
    (0..=n / 2)
        .map(|k| {
            let mut re = 0.0;
            let mut im = 0.0;
            for (j, &x) in frame.iter().enumerate() {
                let ang = -2.0 * PI * (k * j % n) as f64 / n as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            (re, im)
        })
        .collect()
}

pub fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Reflect-pads by `pad` on each side (numpy `mode="reflect"`, pad < len).
pub fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    assert!(pad < n, "oracle only supports pad < len");
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        out.push(x[i]);
    }
    out.extend_from_slice(x);
    for i in 0..pad {
        out.push(x[n - 2 - i]);
    }
    out
}

/// Centered, Hann-windowed STFT frames via direct DFT.
pub fn direct_stft(x: &[f64], n_fft: usize, hop: usize) -> Vec<Vec<C>> {
    let padded = reflect_pad(x, n_fft / 2);
    let w = periodic_hann(n_fft);
    let frames = 1 + x.len() / hop;
    (0..frames)
        .map(|f| {
            let frame: Vec<f64> = (0..n_fft).map(|j| padded[f * hop + j] * w[j]).collect();
            direct_dft_half(&frame)
        })
        .collect()
}

/// Straight-line MFCC pipeline: direct DFT, loop-built mel filters,
/// natural log with floor, naive orthonormal DCT-II.
pub fn reference_mfcc(x: &[f64], sr: f64, n_fft: usize, hop: usize, n_mels: usize, n_keep: usize) -> Vec<Vec<f64>> {
    let frames = direct_stft(x, n_fft, hop);
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sr / 2.0);
    let mut edges = Vec::new();
    for i in 0..n_mels + 2 {
        edges.push(inv(top * i as f64 / (n_mels + 1) as f64));
    }
    let mut out = Vec::new();
    for spec in frames {
        let mut log_mel = vec![0.0; n_mels];
        for m in 0..n_mels {
            let mut e = 0.0;
            for (k, &(re, im)) in spec.iter().enumerate() {
                let f = k as f64 * sr / n_fft as f64;
                let w = if f > edges[m] && f <= edges[m + 1] {
                    (f - edges[m]) / (edges[m + 1] - edges[m])
                } else if f > edges[m + 1] && f < edges[m + 2] {
                    (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1])
                } else {
                    0.0
                };
                e += w * (re * re + im * im);
            }
            log_mel[m] = (e + 1e-10).ln();
        }
        let mut coeffs = Vec::new();
        for k in 0..n_keep {
            let mut s = 0.0;
            for (i, &v) in log_mel.iter().enumerate() {
                s += v * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n_mels) as f64).cos();
            }
            let norm = if k == 0 { (1.0 / n_mels as f64).sqrt() } else { (2.0 / n_mels as f64).sqrt() };
            coeffs.push(s * norm);
        }
        out.push(coeffs);
    }
    out
}

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar-loop FastGRNN step.
/// `w` is `h×d` row-major, `u` is `h×h` row-major.
#[allow(clippy::too_many_arguments)]
pub fn scalar_cell(
    w: &[f64],
    u: &[f64],
    bz: &[f64],
    bh: &[f64],
    zeta_raw: f64,
    nu_raw: f64,
    x: &[f64],
    h_prev: &[f64],
) -> Vec<f64> {
    let d = x.len();
    let h = h_prev.len();
    let zeta = sig(zeta_raw);
    let nu = sig(nu_raw);
    let mut out = vec![0.0; h];
    for i in 0..h {
        let mut a = 0.0;
        for j in 0..d {
            a += w[i * d + j] * x[j];
        }
        for j in 0..h {
            a += u[i * h + j] * h_prev[j];
        }
        let z = sig(a + bz[i]);
        let c = (a + bh[i]).tanh();
        out[i] = (zeta * (1.0 - z) + nu) * c + z * h_prev[i];
    }
    out
}

/// Scalar-loop `W·h + b` with `W` `c×h` row-major.
pub fn scalar_affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let c = b.len();
    let n = x.len();
    (0..c)
        .map(|i| {
            let mut s = b[i];
            for j in 0..n {
                s += w[i * n + j] * x[j];
            }
            s
        })
        .collect()
}

/// Tiny deterministic generator so oracles do not share the crate's RNG use.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / ((1u64 << 53) as f64)
    }

    /// Uniform on `[-a, a]`.
    pub fn sym(&mut self, a: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * a
    }

    pub fn vec(&mut self, n: usize, a: f64) -> Vec<f64> {
        (0..n).map(|_| self.sym(a)).collect()
    }
}

/// max |a − b| / max |b| over complex sequences.
pub fn norm_rel_err(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let scale = b.iter().map(|(r, i)| r.hypot(*i)).fold(0.0, f64::max);
    let err = a
        .iter()
        .zip(b)
        .map(|((ar, ai), (br, bi))| (ar - br).hypot(ai - bi))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

pub fn snr_db(clean: &[f64], observed: &[f64]) -> f64 {
    let s: f64 = clean.iter().map(|x| x * x).sum();
    let e: f64 = clean.iter().zip(observed).map(|(a, b)| (a - b) * (a - b)).sum();
    10.0 * (s / e).log10()
}

pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Mean cross-entropy of `(sequence rows, label)` examples, all in scalar
/// loops over the flat tensors `[W, U, b_z, b_h, ζ_raw, ν_raw, W_fc, b_fc]`.
pub fn oracle_loss(t: &[Vec<f64>; 8], batch: &[(Vec<Vec<f64>>, usize)]) -> f64 {
    let h_dim = t[2].len();
    let mut total = 0.0;
    for (seq, label) in batch {
        let mut h = vec![0.0; h_dim];
        for x in seq {
            h = scalar_cell(&t[0], &t[1], &t[2], &t[3], t[4][0], t[5][0], x, &h);
        }
        let logits = scalar_affine(&t[6], &t[7], &h);
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        total += lse - logits[*label];
    }
    total / batch.len() as f64
}

/// Largest `|a − n| / max(|a|, |n|, 1e-6)` between the library's analytic
/// mean gradient and central differences of [`oracle_loss`] for one random
/// D=3, H=4, C=3, T=5 model and a batch of 4 sequences.
pub fn gradient_check(seed: u64) -> f64 {
    use acoustic_grnn::grnn::{FastGrnn, ModelConfig};
    use acoustic_grnn::train::backprop_batch;
    use acoustic_grnn::Matrix;
    use rand::SeedableRng;

    let cfg = ModelConfig {
        input_dim: 3,
        hidden_dim: 4,
        num_classes: 3,
        seq_len: 5,
    };
    let mut model = FastGrnn::init(&cfg, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    // Move away from the symmetric initial biases and scalars.
    let mut rng = Lcg(seed ^ 0x9e37_79b9);
    for t in model.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.sym(0.5);
        }
    }
    let batch: Vec<(Matrix, usize)> = (0..4)
        .map(|i| (Matrix::from_vec(5, 3, rng.vec(15, 1.5)).unwrap(), i % 3))
        .collect();
    let rows: Vec<(Vec<Vec<f64>>, usize)> = batch
        .iter()
        .map(|(m, l)| ((0..m.rows()).map(|r| m.row(r).to_vec()).collect(), *l))
        .collect();

    let analytic = backprop_batch(&model, &batch).unwrap().grads;
    let flat: [Vec<f64>; 8] = model.tensors().map(|s| s.to_vec());
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (ti, grads) in analytic.tensors().iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let mut plus = flat.clone();
            plus[ti][i] += eps;
            let mut minus = flat.clone();
            minus[ti][i] -= eps;
            let n = (oracle_loss(&plus, &rows) - oracle_loss(&minus, &rows)) / (2.0 * eps);
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-6));
        }
    }
    worst
}
