//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::numeric::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(step_size: f64) -> Self {
        AdamConfig {
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators for one group of parameter blocks.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Accumulators shaped after the given parameter blocks.
    pub fn new(cfg: AdamConfig, blocks: &[&Tensor]) -> Result<Self> {
        if cfg.step_size <= 0.0 {
            return Err(Error::Config(format!(
                "Adam step size must be positive, got {}",
                cfg.step_size
            )));
        }
        Ok(AdamState {
            cfg,
            step: 0,
            m: blocks.iter().map(|b| vec![0.0; b.len()]).collect(),
            v: blocks.iter().map(|b| vec![0.0; b.len()]).collect(),
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update applied in place. `params` and `grads` must
    /// line up with the blocks the state was built from.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dim(
                "adam_step",
                format!(
                    "{} state blocks, {} params, {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::dim(
                    "adam_step",
                    format!("block sizes {} / {} / {}", p.len(), g.len(), m.len()),
                ));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let c = &self.cfg;
        let m_corr = 1.0 - c.beta1.powi(t);
        let v_corr = 1.0 - c.beta2.powi(t);

        for (bi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[bi], &mut self.v[bi]);
            for (i, pv) in p.data_mut().iter_mut().enumerate() {
                let gi = g[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / m_corr;
                let v_hat = v[i] / v_corr;
                *pv -= c.step_size * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
        Ok(())
    }
}
