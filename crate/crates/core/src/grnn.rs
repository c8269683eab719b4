//! FastGRNN cell, unrolled forward pass, output layer and softmax.
//!
//! The cell shares one input projection `W` and one recurrent projection `U`
//! between the update gate and the candidate state:
//!
//! ```text
//! a_t  = W x_t + U h_{t-1}
//! z_t  = σ(a_t + b_z)
//! h̃_t  = tanh(a_t + b_h)
//! h_t  = (ζ (1 - z_t) + ν) ⊙ h̃_t + z_t ⊙ h_{t-1}
//! ```
//!
//! `ζ` and `ν` are stored as unconstrained scalars and squashed through a
//! sigmoid, so they always stay in `(0, 1)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Network geometry. Defaults: 13-dim input, 26 hidden units, 6 classes,
/// 26 steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub seq_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 13,
            hidden_dim: 26,
            num_classes: 6,
            seq_len: 26,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 || self.seq_len == 0 {
            return Err(Error::BadConfig(format!("all dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Cell-only parameter count: `H·D + H·H + 2H + 2`.
pub fn count_cell_parameters(config: &ModelConfig) -> usize {
    let (d, h) = (config.input_dim, config.hidden_dim);
    h * d + h * h + 2 * h + 2
}

/// Trainable parameters of cell plus output layer.
pub fn count_parameters(config: &ModelConfig) -> usize {
    let (h, c) = (config.hidden_dim, config.num_classes);
    count_cell_parameters(config) + c * h + c
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax outputs, one probability per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassProbs(Vec<f64>);

impl ClassProbs {
    /// Wraps an existing distribution after checking it sums to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::NonFiniteInput);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::BadConfig(format!("probabilities sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// Arithmetic mean of several distributions over the same classes.
    pub fn mean(dists: &[ClassProbs]) -> Result<Self> {
        let first = dists.first().ok_or(Error::EmptyDataset)?;
        let n = first.len();
        let mut acc = vec![0.0; n];
        for d in dists {
            if d.len() != n {
                return Err(Error::DimensionMismatch(format!("{} vs {n} classes", d.len())));
            }
            for (a, p) in acc.iter_mut().zip(&d.0) {
                *a += p;
            }
        }
        let k = dists.len() as f64;
        Ok(Self(acc.into_iter().map(|a| a / k).collect()))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Result<ClassProbs> {
    if logits.is_empty() || logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(ClassProbs(exps.into_iter().map(|e| e / sum).collect()))
}

/// Recurrent cell parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastGrnnParams {
    /// `H × D` input projection.
    pub w: Matrix,
    /// `H × H` recurrent projection.
    pub u: Matrix,
    pub b_z: Vec<f64>,
    pub b_h: Vec<f64>,
    pub zeta_raw: f64,
    pub nu_raw: f64,
}

pub const ZETA_RAW_INIT: f64 = 4.0;
pub const NU_RAW_INIT: f64 = -4.0;

impl FastGrnnParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let (d, h) = (config.input_dim, config.hidden_dim);
        Self {
            w: Matrix::zeros(h, d),
            u: Matrix::zeros(h, h),
            b_z: vec![0.0; h],
            b_h: vec![0.0; h],
            zeta_raw: 0.0,
            nu_raw: 0.0,
        }
    }

    /// `W ~ U[-1/√D, 1/√D]`, `U ~ U[-1/√H, 1/√H]`, zero biases,
    /// `ζ ≈ 0.982`, `ν ≈ 0.018`.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let (d, h) = (config.input_dim, config.hidden_dim);
        let wb = 1.0 / (d as f64).sqrt();
        let ub = 1.0 / (h as f64).sqrt();
        Self {
            w: Matrix::from_fn(h, d, |_, _| rng.gen_range(-wb..=wb)),
            u: Matrix::from_fn(h, h, |_, _| rng.gen_range(-ub..=ub)),
            b_z: vec![0.0; h],
            b_h: vec![0.0; h],
            zeta_raw: ZETA_RAW_INIT,
            nu_raw: NU_RAW_INIT,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn zeta(&self) -> f64 {
        sigmoid(self.zeta_raw)
    }

    pub fn nu(&self) -> f64 {
        sigmoid(self.nu_raw)
    }

    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden_dim();
        if self.u.shape() != (h, h) || self.b_z.len() != h || self.b_h.len() != h {
            return Err(Error::DimensionMismatch(format!(
                "cell with W {:?}, U {:?}, b_z {}, b_h {}",
                self.w.shape(),
                self.u.shape(),
                self.b_z.len(),
                self.b_h.len()
            )));
        }
        Ok(())
    }
}

/// Output layer `P = W_fc · h + b_fc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcParams {
    /// `C × H`.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl FcParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            w: Matrix::zeros(config.num_classes, config.hidden_dim),
            b: vec![0.0; config.num_classes],
        }
    }

    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let bound = 1.0 / (config.hidden_dim as f64).sqrt();
        Self {
            w: Matrix::from_fn(config.num_classes, config.hidden_dim, |_, _| {
                rng.gen_range(-bound..=bound)
            }),
            b: vec![0.0; config.num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w.rows()
    }
}

/// Gate, candidate and new state from one cell evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutput {
    pub z: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub h: Vec<f64>,
}

/// One step, keeping the intermediate gate and candidate.
pub fn cell_forward(params: &FastGrnnParams, x_t: &[f64], h_prev: &[f64]) -> Result<CellOutput> {
    params.check_shapes()?;
    if x_t.len() != params.input_dim() || h_prev.len() != params.hidden_dim() {
        return Err(Error::DimensionMismatch(format!(
            "cell expects x of {} and h of {}, got {} and {}",
            params.input_dim(),
            params.hidden_dim(),
            x_t.len(),
            h_prev.len()
        )));
    }
    Ok(cell_forward_unchecked(params, params.zeta(), params.nu(), x_t, h_prev))
}

pub(crate) fn cell_forward_unchecked(
    params: &FastGrnnParams,
    zeta: f64,
    nu: f64,
    x_t: &[f64],
    h_prev: &[f64],
) -> CellOutput {
    let h = params.hidden_dim();
    // Shared pre-activation, computed once for both gate and candidate.
    let mut pre = params.w.mul_vec(x_t);
    let mut uh = vec![0.0; h];
    params.u.mul_vec_into(h_prev, &mut uh);
    for (p, q) in pre.iter_mut().zip(&uh) {
        *p += q;
    }
    let mut z = vec![0.0; h];
    let mut h_tilde = vec![0.0; h];
    let mut h_new = vec![0.0; h];
    for i in 0..h {
        z[i] = sigmoid(pre[i] + params.b_z[i]);
        h_tilde[i] = (pre[i] + params.b_h[i]).tanh();
        h_new[i] = (zeta * (1.0 - z[i]) + nu) * h_tilde[i] + z[i] * h_prev[i];
    }
    CellOutput {
        z,
        h_tilde,
        h: h_new,
    }
}

pub fn cell_step(params: &FastGrnnParams, x_t: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    cell_forward(params, x_t, h_prev).map(|o| o.h)
}

/// Runs the cell over every row of `seq` (a `T × D` matrix) from `h_0 = 0`
/// and returns the final state.
pub fn forward_sequence(params: &FastGrnnParams, seq: &Matrix) -> Result<Vec<f64>> {
    check_sequence(params, seq)?;
    let (zeta, nu) = (params.zeta(), params.nu());
    let mut h = vec![0.0; params.hidden_dim()];
    for x in seq.iter_rows() {
        h = cell_forward_unchecked(params, zeta, nu, x, &h).h;
    }
    Ok(h)
}

pub(crate) fn check_sequence(params: &FastGrnnParams, seq: &Matrix) -> Result<()> {
    params.check_shapes()?;
    if seq.cols() != params.input_dim() || seq.rows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "sequence is {:?}, cell input is {}",
            seq.shape(),
            params.input_dim()
        )));
    }
    Ok(())
}

pub fn fc_logits(fc: &FcParams, h: &[f64]) -> Result<Vec<f64>> {
    if fc.w.cols() != h.len() || fc.b.len() != fc.w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "FC layer {:?} with bias {} applied to state of {}",
            fc.w.shape(),
            fc.b.len(),
            h.len()
        )));
    }
    let mut p = fc.w.mul_vec(h);
    for (pi, bi) in p.iter_mut().zip(&fc.b) {
        *pi += bi;
    }
    Ok(p)
}

/// Cell plus output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastGrnn {
    pub cell: FastGrnnParams,
    pub fc: FcParams,
}

impl FastGrnn {
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        Self {
            cell: FastGrnnParams::init(config, rng),
            fc: FcParams::init(config, rng),
        }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            cell: FastGrnnParams::zeros(config),
            fc: FcParams::zeros(config),
        }
    }

    pub fn config(&self, seq_len: usize) -> ModelConfig {
        ModelConfig {
            input_dim: self.cell.input_dim(),
            hidden_dim: self.cell.hidden_dim(),
            num_classes: self.fc.num_classes(),
            seq_len,
        }
    }

    /// Tensors in storage order: W, U, b_z, b_h, ζ_raw, ν_raw, W_fc, b_fc.
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.cell.w.as_slice(),
            self.cell.u.as_slice(),
            &self.cell.b_z,
            &self.cell.b_h,
            std::slice::from_ref(&self.cell.zeta_raw),
            std::slice::from_ref(&self.cell.nu_raw),
            self.fc.w.as_slice(),
            &self.fc.b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.cell.w.as_mut_slice(),
            self.cell.u.as_mut_slice(),
            &mut self.cell.b_z,
            &mut self.cell.b_h,
            std::slice::from_mut(&mut self.cell.zeta_raw),
            std::slice::from_mut(&mut self.cell.nu_raw),
            self.fc.w.as_mut_slice(),
            &mut self.fc.b,
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn check_shapes(&self) -> Result<()> {
        self.cell.check_shapes()?;
        if self.fc.w.cols() != self.cell.hidden_dim() || self.fc.b.len() != self.fc.w.rows() {
            return Err(Error::DimensionMismatch(format!(
                "FC layer {:?} on hidden size {}",
                self.fc.w.shape(),
                self.cell.hidden_dim()
            )));
        }
        Ok(())
    }

    pub fn logits(&self, seq: &Matrix) -> Result<Vec<f64>> {
        fc_logits(&self.fc, &forward_sequence(&self.cell, seq)?)
    }

    pub fn predict(&self, seq: &Matrix) -> Result<ClassProbs> {
        softmax(&self.logits(seq)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(d: usize, h: usize, c: usize) -> ModelConfig {
        ModelConfig {
            input_dim: d,
            hidden_dim: h,
            num_classes: c,
            seq_len: 5,
        }
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(count_parameters(&ModelConfig::default()), 1230);
        assert_eq!(count_parameters(&cfg(1, 1, 1)), 8);
        assert_eq!(count_cell_parameters(&ModelConfig::default()), 1068);
    }

    #[test]
    fn saturated_gate_copies_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = FastGrnnParams::init(&cfg(3, 2, 2), &mut rng);
        p.b_z = vec![50.0; 2];
        let h_prev = [0.3, -0.7];
        let x = [1.0, -2.0, 0.5];
        // z = 1 leaves h_prev + ν·h̃; the ν term is the cell's residual path.
        let out = cell_forward(&p, &x, &h_prev).unwrap();
        for ((h, hp), ht) in out.h.iter().zip(&h_prev).zip(&out.h_tilde) {
            assert!((h - (hp + p.nu() * ht)).abs() < 1e-12);
        }
        p.nu_raw = -50.0;
        let h = cell_step(&p, &x, &h_prev).unwrap();
        for (a, b) in h.iter().zip(&h_prev) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_raw_params_keep_zero_state() {
        let p = FastGrnnParams::zeros(&cfg(3, 2, 2));
        let out = cell_forward(&p, &[1.0, 2.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_eq!(out.z, vec![0.5, 0.5]);
        assert_eq!(out.h_tilde, vec![0.0, 0.0]);
        assert_eq!(out.h, vec![0.0, 0.0]);
        let seq = Matrix::from_fn(10, 3, |r, c| (r + c) as f64);
        assert_eq!(forward_sequence(&p, &seq).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_step_sequence_is_cell_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = FastGrnnParams::init(&cfg(4, 3, 2), &mut rng);
        let x = [0.1, -0.2, 0.3, 0.9];
        let seq = Matrix::from_vec(1, 4, x.to_vec()).unwrap();
        assert_eq!(
            forward_sequence(&p, &seq).unwrap(),
            cell_step(&p, &x, &[0.0; 3]).unwrap()
        );
    }

    #[test]
    fn dimension_errors() {
        let p = FastGrnnParams::zeros(&cfg(3, 2, 2));
        assert!(matches!(cell_step(&p, &[1.0], &[0.0, 0.0]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(cell_step(&p, &[1.0; 3], &[0.0]), Err(Error::DimensionMismatch(_))));
        let fc = FcParams::zeros(&cfg(3, 2, 2));
        assert!(matches!(fc_logits(&fc, &[1.0; 3]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn fc_selection_and_bias() {
        let fc = FcParams {
            w: Matrix::zeros(3, 4),
            b: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(fc_logits(&fc, &[9.0; 4]).unwrap(), vec![1.0, 2.0, 3.0]);
        let sel = FcParams {
            w: Matrix::from_fn(3, 4, |r, c| if r == c { 1.0 } else { 0.0 }),
            b: vec![0.0; 3],
        };
        assert_eq!(fc_logits(&sel, &[5.0, 6.0, 7.0, 8.0]).unwrap(), vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn softmax_cases() {
        let u = softmax(&[0.0; 6]).unwrap();
        assert!(u.as_slice().iter().all(|p| (p - 1.0 / 6.0).abs() < 1e-15));
        let p = softmax(&[2.0, 1.0, 0.1]).unwrap();
        for (got, want) in p.as_slice().iter().zip([0.6590, 0.2424, 0.0986]) {
            assert!((got - want).abs() < 1e-3);
        }
        let shifted = softmax(&[102.0, 101.0, 100.1]).unwrap();
        for (a, b) in p.as_slice().iter().zip(shifted.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(softmax(&[1.0, f64::NAN]), Err(Error::NonFiniteInput)));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn zeta_nu_initial_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = FastGrnnParams::init(&ModelConfig::default(), &mut rng);
        assert!((p.zeta() - 0.982).abs() < 1e-3);
        assert!((p.nu() - 0.018).abs() < 1e-3);
        let wb = 1.0 / 13f64.sqrt();
        assert!(p.w.as_slice().iter().all(|v| v.abs() <= wb));
    }
}
