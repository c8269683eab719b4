mod common;

use std::collections::BTreeSet;

use acoustic_grnn::dsp::MfccSequence;
use acoustic_grnn::grnn::{ClassProbs, FastGrnn, ModelConfig};
use acoustic_grnn::train::{
    adam_step, apply_norm, backprop_batch, calibrate_thresholds, clip_global_norm, fit_norm_stats,
    thresholds_from_aggregates, Adam, AdamConfig, CalibrationClip, ClassThresholds, NormStats,
};
use acoustic_grnn::model_store::ModelBundle;
use acoustic_grnn::{Error, Matrix};
use common::{gradient_check, Lcg};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    for seed in 0..5 {
        let err = gradient_check(seed);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn duplicated_batch_has_the_same_mean_gradient() {
    let cfg = ModelConfig {
        input_dim: 4,
        hidden_dim: 5,
        num_classes: 3,
        seq_len: 6,
    };
    let model = FastGrnn::init(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
    let mut rng = Lcg(8);
    let batch: Vec<(Matrix, usize)> = (0..3)
        .map(|i| (Matrix::from_vec(6, 4, rng.vec(24, 1.0)).unwrap(), i))
        .collect();
    let doubled: Vec<(Matrix, usize)> = batch.iter().chain(&batch).cloned().collect();
    let a = backprop_batch(&model, &batch).unwrap();
    let b = backprop_batch(&model, &doubled).unwrap();
    assert!((a.loss - b.loss).abs() < 1e-12);
    for (x, y) in a.grads.tensors().iter().zip(b.grads.tensors()) {
        for (p, q) in x.iter().zip(y) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    // With bias correction, step one is lr·g/(|g| + ε) per coordinate.
    let cfg = AdamConfig::default();
    let mut p = vec![1.0, -2.0, 0.5];
    let g = vec![0.3, -4.0, 1e-3];
    let (mut m, mut v) = (vec![0.0; 3], vec![0.0; 3]);
    adam_step(&cfg, &mut p, &g, &mut m, &mut v, 1).unwrap();
    let want = [1.0 - 1e-3 * 0.3 / (0.3 + 1e-8), -2.0 + 1e-3 * 4.0 / (4.0 + 1e-8), 0.5 - 1e-3 * 1e-3 / (1e-3 + 1e-8)];
    for (a, b) in p.iter().zip(want) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(matches!(adam_step(&cfg, &mut p, &g, &mut m, &mut v, 0), Err(Error::BadConfig(_))));
}

#[test]
fn adam_is_deterministic() {
    let cfg = ModelConfig {
        input_dim: 3,
        hidden_dim: 4,
        num_classes: 2,
        seq_len: 4,
    };
    let run = || {
        let mut model = FastGrnn::init(&cfg, &mut ChaCha8Rng::seed_from_u64(5));
        let mut opt = Adam::new(AdamConfig::default(), &model);
        let mut rng = Lcg(2);
        let batch: Vec<(Matrix, usize)> = (0..4)
            .map(|i| (Matrix::from_vec(4, 3, rng.vec(12, 1.0)).unwrap(), i % 2))
            .collect();
        for _ in 0..20 {
            let mut g = backprop_batch(&model, &batch).unwrap().grads;
            clip_global_norm(&mut g, 5.0);
            opt.step(&mut model, &g).unwrap();
        }
        model
    };
    let (a, b) = (run(), run());
    for (x, y) in a.tensors().iter().zip(b.tensors()) {
        assert!(x.iter().zip(y.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

#[test]
fn clipping_caps_the_global_norm() {
    let cfg = ModelConfig {
        input_dim: 2,
        hidden_dim: 2,
        num_classes: 2,
        seq_len: 1,
    };
    let mut g = FastGrnn::zeros(&cfg);
    g.cell.b_z = vec![30.0, 40.0];
    let before = clip_global_norm(&mut g, 5.0);
    assert!((before - 50.0).abs() < 1e-12);
    assert!((g.cell.b_z[0] - 3.0).abs() < 1e-12 && (g.cell.b_z[1] - 4.0).abs() < 1e-12);
}

#[test]
fn hand_calibrated_thresholds() {
    // Ten clips over three classes with known aggregates.
    let rows: [([f64; 3], &[usize]); 10] = [
        ([0.7, 0.2, 0.1], &[0]),
        ([0.6, 0.3, 0.1], &[0]),
        ([0.5, 0.4, 0.1], &[0, 1]),
        ([0.1, 0.8, 0.1], &[1]),
        ([0.2, 0.7, 0.1], &[1]),
        ([0.1, 0.1, 0.8], &[2]),
        ([0.2, 0.2, 0.6], &[2]),
        ([0.3, 0.1, 0.6], &[0, 2]),
        ([0.1, 0.6, 0.3], &[1]),
        ([0.4, 0.3, 0.3], &[0]),
    ];
    let clips: Vec<(ClassProbs, BTreeSet<usize>)> = rows
        .iter()
        .map(|(p, c)| (ClassProbs::new(p.to_vec()).unwrap(), c.iter().copied().collect()))
        .collect();
    let tau = thresholds_from_aggregates(&clips, 3).unwrap();
    let want = [
        (0.7 + 0.6 + 0.5 + 0.3 + 0.4) / 5.0,
        (0.4 + 0.8 + 0.7 + 0.6) / 4.0,
        (0.8 + 0.6 + 0.6) / 3.0,
    ];
    for (a, b) in tau.as_slice().iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    let missing = &clips[..2];
    assert!(matches!(thresholds_from_aggregates(missing, 3), Err(Error::MissingClass(1))));
}

#[test]
fn calibration_through_a_model_averages_segment_outputs() {
    // Zero weights with biases fixes every segment's output, so each clip's
    // aggregate is softmax(b_fc) whatever its features.
    let cfg = ModelConfig {
        input_dim: 13,
        hidden_dim: 4,
        num_classes: 2,
        seq_len: 26,
    };
    let mut model = FastGrnn::zeros(&cfg);
    model.fc.b = vec![1.0, -1.0];
    let bundle = ModelBundle::new(
        cfg,
        model,
        NormStats::identity(13),
        ClassThresholds::constant(2, 0.5),
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let seg = MfccSequence::new(Matrix::from_fn(26, 13, |r, c| (r + c) as f64)).unwrap();
    let clips = vec![
        CalibrationClip {
            segments: vec![seg.clone(); 5],
            classes: [0].into(),
        },
        CalibrationClip {
            segments: vec![seg; 3],
            classes: [1].into(),
        },
    ];
    let tau = calibrate_thresholds(&bundle, &clips).unwrap();
    let b0 = (1.0f32 as f64).exp();
    let b1 = (-1.0f32 as f64).exp();
    assert!((tau.as_slice()[0] - b0 / (b0 + b1)).abs() < 1e-12);
    assert!((tau.as_slice()[1] - b1 / (b0 + b1)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn zscore_round_trip(values in prop::collection::vec(-50.0f64..50.0, 3 * 4 * 5)) {
        let seqs: Vec<Matrix> = values.chunks(20).map(|c| Matrix::from_vec(4, 5, c.to_vec()).unwrap()).collect();
        let stats = fit_norm_stats(&seqs).unwrap();
        for s in &seqs {
            let back = stats.denormalize(&apply_norm(&stats, s).unwrap()).unwrap();
            for (a, b) in s.as_slice().iter().zip(back.as_slice()) {
                prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn normalized_training_frames_are_standard(values in prop::collection::vec(-5.0f64..5.0, 60)) {
        let seqs: Vec<Matrix> = values.chunks(12).map(|c| Matrix::from_vec(4, 3, c.to_vec()).unwrap()).collect();
        let stats = fit_norm_stats(&seqs).unwrap();
        let normed: Vec<Matrix> = seqs.iter().map(|s| apply_norm(&stats, s).unwrap()).collect();
        for c in 0..3 {
            let col: Vec<f64> = normed.iter().flat_map(|m| (0..4).map(move |r| m.get(r, c))).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(var < 1e-9 || (var - 1.0).abs() < 1e-9);
        }
    }
}
