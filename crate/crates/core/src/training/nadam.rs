//! NAdam with the momentum-decay schedule
//! `mu_t = β1 · (1 − 0.5 · 0.96^(t·ψ))`.

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum_decay: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            momentum_decay: 0.004,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NadamState {
    pub config: NadamConfig,
    pub step: u64,
    pub mu_product: f64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl NadamState {
    pub fn new(params: &ModelParams, config: NadamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().map(|t| vec![0.0; t.len()]).collect();
        Self {
            config,
            step: 0,
            mu_product: 1.0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    fn mu(&self, t: u64) -> f64 {
        self.config.beta1 * (1.0 - 0.5 * 0.96f64.powf(t as f64 * self.config.momentum_decay))
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.layers.len() != params.layers.len()
            || grads.tensors().zip(params.tensors()).any(|(g, p)| g.len() != p.len())
        {
            return Err(Error::DimensionMismatch("gradients do not match parameters".into()));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        self.step += 1;
        let t = self.step;
        let NadamConfig { beta1, beta2, eps, .. } = self.config;
        let mu = self.mu(t);
        let mu_next = self.mu(t + 1);
        self.mu_product *= mu;
        let bias2 = 1.0 - beta2.powf(t as f64);
        let grad_coef = -lr * (1.0 - mu) / (1.0 - self.mu_product);
        let mom_coef = -lr * mu_next / (1.0 - self.mu_product * mu_next);

        let tensors = params
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let denom = (v[i] / bias2).sqrt() + eps;
                p[i] += grad_coef * gi / denom;
                p[i] += mom_coef * m[i] / denom;
            }
        }
        Ok(())
    }
}
