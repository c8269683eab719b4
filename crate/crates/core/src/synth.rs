//! Deterministic synthetic six-class corpus with distinct tone, chirp and
//! noise-band signatures. Every 0.6 s segment carries its class signature.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio_io::{AudioClip, CANONICAL_RATE};
use crate::error::Result;
use crate::features::{clip_features, FeatureRecord, FeatureSet, Preprocess};

/// Class vocabulary, in label-index order.
pub const CLASS_NAMES: [&str; 6] = [
    "car_horn",
    "children_playing",
    "dog_bark",
    "drilling",
    "engine_idling",
    "siren",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub clips_per_class: usize,
    pub duration_secs: f64,
    /// Peak-level jitter, uniformly drawn in `±amplitude_jitter_db`.
    pub amplitude_jitter_db: f64,
    /// Std of the white background added to every clip.
    pub background_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            clips_per_class: 100,
            duration_secs: 3.0,
            amplitude_jitter_db: 6.0,
            background_std: 0.003,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClip {
    pub id: String,
    pub label: usize,
    pub clip: AudioClip,
}

/// Gaussian noise restricted to `[lo, hi]` Hz, with unit RMS.
fn band_noise<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let sr = CANONICAL_RATE as f64;
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in spec.iter_mut().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * sr / n as f64;
        if (lo..=hi).contains(&f) {
            *slot = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let out: Vec<f64> = spec.iter().map(|z| z.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt().max(1e-12);
    out.into_iter().map(|v| v / rms).collect()
}

/// Renders one clip of `class` at 22050 Hz.
pub fn render_class<R: Rng>(class: usize, cfg: &SynthConfig, rng: &mut R) -> AudioClip {
    let sr = CANONICAL_RATE as f64;
    let n = (cfg.duration_secs * sr).round() as usize;
    let phase: f64 = rng.gen_range(0.0..TAU);
    let phase2: f64 = rng.gen_range(0.0..TAU);
    let jitter_db: f64 = rng.gen_range(-cfg.amplitude_jitter_db..=cfg.amplitude_jitter_db);
    let gain = 0.2 * 10f64.powf(jitter_db / 20.0);

    let mut signal: Vec<f64> = match class {
        // Two steady horn tones with a second harmonic each.
        0 => {
            let f1 = rng.gen_range(400.0..440.0);
            let f2 = f1 * 1.25;
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    0.5 * (TAU * f1 * t + phase).sin()
                        + 0.5 * (TAU * f2 * t + phase2).sin()
                        + 0.2 * (TAU * 2.0 * f1 * t + phase).sin()
                        + 0.2 * (TAU * 2.0 * f2 * t + phase2).sin()
                })
                .collect()
        }
        // Mid-high noise band with a slow tremolo.
        1 => {
            let am = rng.gen_range(3.0..5.0);
            band_noise(rng, n, 2000.0, 4000.0)
                .into_iter()
                .enumerate()
                .map(|(i, v)| v * (0.6 + 0.4 * (TAU * am * i as f64 / sr + phase).sin()))
                .collect()
        }
        // Short harmonic bursts every 200 ms.
        2 => {
            let f0 = rng.gen_range(650.0..750.0);
            let offset = rng.gen_range(0.0..0.2);
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    let local = (t + offset) % 0.2;
                    let env = if local < 0.08 { (std::f64::consts::PI * local / 0.08).sin() } else { 0.0 };
                    env * ((TAU * f0 * t + phase).sin() + 0.5 * (TAU * 2.0 * f0 * t + phase2).sin())
                })
                .collect()
        }
        // High noise band chopped at a drill-like 30 Hz.
        3 => {
            let rate = rng.gen_range(28.0..32.0);
            band_noise(rng, n, 5000.0, 8000.0)
                .into_iter()
                .enumerate()
                .map(|(i, v)| v * (0.5 + 0.5 * (TAU * rate * i as f64 / sr + phase).sin()))
                .collect()
        }
        // Low harmonic series.
        4 => {
            let f0 = rng.gen_range(45.0..60.0);
            let phases: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..TAU)).collect();
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    phases
                        .iter()
                        .enumerate()
                        .map(|(k, p)| (TAU * f0 * (k + 1) as f64 * t + p).sin() / (k + 1) as f64)
                        .sum::<f64>()
                        * 0.6
                })
                .collect()
        }
        // Repeating rising sweep, 600→1400 Hz every 0.5 s.
        _ => {
            let (lo, hi, period) = (600.0, 1400.0, 0.5);
            let offset = rng.gen_range(0.0..period);
            let mut acc = phase;
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr + offset;
                    let f = lo + (hi - lo) * ((t % period) / period);
                    acc += TAU * f / sr;
                    acc.sin()
                })
                .collect()
        }
    };

    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    for s in &mut signal {
        let bg: f64 = rng.sample(StandardNormal);
        *s = *s / peak * gain + bg * cfg.background_std;
    }
    AudioClip::new(signal, CANONICAL_RATE).expect("canonical rate")
}

/// `clips_per_class` clips for each class, classes interleaved.
pub fn generate(cfg: &SynthConfig) -> Vec<SynthClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.clips_per_class * CLASS_NAMES.len());
    for k in 0..cfg.clips_per_class {
        for (label, name) in CLASS_NAMES.iter().enumerate() {
            out.push(SynthClip {
                id: format!("{name}_{k:03}"),
                label,
                clip: render_class(label, cfg, &mut rng),
            });
        }
    }
    out
}

/// MFCC features for a synthetic corpus.
pub fn feature_set(clips: &[SynthClip], pre: &Preprocess) -> Result<FeatureSet> {
    let mut set = FeatureSet::new(CLASS_NAMES.iter().map(|s| s.to_string()).collect());
    for c in clips {
        for (segment, mfcc) in clip_features(&c.clip, pre)?.into_iter().enumerate() {
            set.records.push(FeatureRecord {
                clip: c.id.clone(),
                segment,
                label: c.label,
                mfcc,
            });
        }
    }
    Ok(set)
}
