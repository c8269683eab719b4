//! Backpropagation through time for the FastGRNN classifier.

use crate::error::{Error, Result};
use crate::grnn::{cell_forward_unchecked, check_sequence, fc_logits, softmax, CellOutput, ClassProbs, FastGrnn};
use crate::matrix::Matrix;

/// Probability clamp used by [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln(max(p[label], 1e-12))`.
pub fn cross_entropy(probs: &ClassProbs, label: usize) -> Result<f64> {
    let p = probs.as_slice().get(label).ok_or(Error::BadLabel {
        label,
        classes: probs.len(),
    })?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Mean batch gradient, laid out like the model itself.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    pub grads: FastGrnn,
    pub loss: f64,
}

/// Accumulates the gradient of one example into `grads` and returns its loss.
fn accumulate(model: &FastGrnn, seq: &Matrix, label: usize, grads: &mut FastGrnn) -> Result<f64> {
    let cell = &model.cell;
    let h_dim = cell.hidden_dim();
    let zeta = cell.zeta();
    let nu = cell.nu();

    // Forward, keeping every step's state.
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(seq.rows() + 1);
    let mut steps: Vec<CellOutput> = Vec::with_capacity(seq.rows());
    states.push(vec![0.0; h_dim]);
    for x in seq.iter_rows() {
        let out = cell_forward_unchecked(cell, zeta, nu, x, states.last().expect("h_0"));
        states.push(out.h.clone());
        steps.push(out);
    }
    let h_last = states.last().expect("non-empty");
    let probs = softmax(&fc_logits(&model.fc, h_last)?)?;
    let loss = cross_entropy(&probs, label)?;

    // dL/dP = softmax - onehot
    let mut d_logits = probs.as_slice().to_vec();
    d_logits[label] -= 1.0;
    grads.fc.w.add_outer(&d_logits, h_last);
    for (g, d) in grads.fc.b.iter_mut().zip(&d_logits) {
        *g += d;
    }
    let mut dh = vec![0.0; h_dim];
    model.fc.w.add_transpose_mul_vec(&d_logits, &mut dh);

    let mut d_zeta = 0.0;
    let mut d_nu = 0.0;
    let mut d_pre = vec![0.0; h_dim];
    for t in (0..steps.len()).rev() {
        let CellOutput { z, h_tilde, .. } = &steps[t];
        let h_prev = &states[t];
        let mut dh_prev = vec![0.0; h_dim];
        for i in 0..h_dim {
            let g = dh[i];
            d_zeta += g * (1.0 - z[i]) * h_tilde[i];
            d_nu += g * h_tilde[i];
            let dz = g * (h_prev[i] - zeta * h_tilde[i]);
            let dht = g * (zeta * (1.0 - z[i]) + nu);
            let da_z = dz * z[i] * (1.0 - z[i]);
            let da_h = dht * (1.0 - h_tilde[i] * h_tilde[i]);
            grads.cell.b_z[i] += da_z;
            grads.cell.b_h[i] += da_h;
            // W and U feed both paths, so their pre-activation gradient is the sum.
            d_pre[i] = da_z + da_h;
            dh_prev[i] = g * z[i];
        }
        grads.cell.w.add_outer(&d_pre, seq.row(t));
        grads.cell.u.add_outer(&d_pre, h_prev);
        cell.u.add_transpose_mul_vec(&d_pre, &mut dh_prev);
        dh = dh_prev;
    }
    grads.cell.zeta_raw += d_zeta * zeta * (1.0 - zeta);
    grads.cell.nu_raw += d_nu * nu * (1.0 - nu);
    Ok(loss)
}

/// Mean cross-entropy gradient over `batch` for every parameter.
pub fn backprop_batch<S: AsRef<Matrix>>(model: &FastGrnn, batch: &[(S, usize)]) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    model.check_shapes()?;
    let classes = model.fc.num_classes();
    let mut grads = FastGrnn::zeros(&model.config(1));
    let mut loss = 0.0;
    for (seq, label) in batch {
        let seq = seq.as_ref();
        check_sequence(&model.cell, seq)?;
        if *label >= classes {
            return Err(Error::BadLabel { label: *label, classes });
        }
        loss += accumulate(model, seq, *label, &mut grads)?;
    }
    let scale = 1.0 / batch.len() as f64;
    for t in grads.tensors_mut() {
        t.iter_mut().for_each(|g| *g *= scale);
    }
    Ok(BatchGradient {
        grads,
        loss: loss * scale,
    })
}

/// Mean loss without gradients.
pub fn batch_loss<S: AsRef<Matrix>>(model: &FastGrnn, batch: &[(S, usize)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (seq, label) in batch {
        total += cross_entropy(&model.predict(seq.as_ref())?, *label)?;
    }
    Ok(total / batch.len() as f64)
}

/// Scales every gradient so the global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut FastGrnn, max_norm: f64) -> f64 {
    let norm = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
