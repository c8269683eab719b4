use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-coefficient Z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `x · std + mean`, the inverse of [`apply_norm`].
    pub fn denormalize(&self, seq: &Matrix) -> Result<Matrix> {
        self.check(seq)?;
        Ok(Matrix::from_fn(seq.rows(), seq.cols(), |r, c| {
            seq.get(r, c) * self.std[c] + self.mean[c]
        }))
    }

    fn check(&self, seq: &Matrix) -> Result<()> {
        if seq.cols() != self.dim() || self.std.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "stats for {} coefficients, sequence has {}",
                self.dim(),
                seq.cols()
            )));
        }
        Ok(())
    }
}

/// Mean and population std per column across every frame of every sequence.
pub fn fit_norm_stats<'a, I, S>(features: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a S>,
    S: AsRef<Matrix> + 'a,
{
    let mut dim = None;
    let mut count = 0usize;
    let mut sum = Vec::new();
    let mut sum_sq = Vec::new();
    let seqs: Vec<&Matrix> = features.into_iter().map(AsRef::as_ref).collect();
    // Two passes (mean, then squared deviations) for accuracy.
    for seq in &seqs {
        let d = *dim.get_or_insert(seq.cols());
        if seq.cols() != d {
            return Err(Error::DimensionMismatch(format!("{} vs {d} coefficients", seq.cols())));
        }
        sum.resize(d, 0.0);
        for row in seq.iter_rows() {
            for (s, x) in sum.iter_mut().zip(row) {
                *s += x;
            }
        }
        count += seq.rows();
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    sum_sq.resize(mean.len(), 0.0);
    for seq in &seqs {
        for row in seq.iter_rows() {
            for ((s, x), m) in sum_sq.iter_mut().zip(row).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
    }
    let std = sum_sq
        .iter()
        .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormStats { mean, std })
}

/// `(x - mean) / std` per column.
pub fn apply_norm(stats: &NormStats, seq: &Matrix) -> Result<Matrix> {
    stats.check(seq)?;
    Ok(Matrix::from_fn(seq.rows(), seq.cols(), |r, c| {
        (seq.get(r, c) - stats.mean[c]) / stats.std[c]
    }))
}
