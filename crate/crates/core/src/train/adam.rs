use crate::error::{Error, Result};
use crate::grnn::FastGrnn;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over flat slices. `step` starts at 1.
pub fn adam_step(
    cfg: &AdamConfig,
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || m.len() != n || v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "adam over {n} params with {} grads, {} / {} moments",
            grads.len(),
            m.len(),
            v.len()
        )));
    }
    if step == 0 {
        return Err(Error::BadConfig("adam step index starts at 1".into()));
    }
    let bc1 = 1.0 - cfg.beta1.powf(step as f64);
    let bc2 = 1.0 - cfg.beta2.powf(step as f64);
    for i in 0..n {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Adam state for a whole [`FastGrnn`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: FastGrnn,
    v: FastGrnn,
    step: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, like: &FastGrnn) -> Self {
        let zeros = FastGrnn::zeros(&like.config(1));
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut FastGrnn, grads: &FastGrnn) -> Result<()> {
        self.step += 1;
        let step = self.step;
        let cfg = self.config;
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            adam_step(&cfg, p, g, m, v, step)?;
        }
        Ok(())
    }
}
