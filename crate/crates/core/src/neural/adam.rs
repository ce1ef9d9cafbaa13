use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Adam {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(
                self.m.len(),
                format!("params {} / grads {}", params.len(), grads.len()),
            ));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = vec![1.0, -2.0];
        let mut opt = Adam::new(2, AdamConfig::default());
        opt.step(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let mut opt = Adam::new(3, AdamConfig::default());
        opt.step(&mut p, &[0.3, -7.0, 1e-3]).unwrap();
        for (v, s) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - s * 1e-3).abs() < 1e-3 * 1e-4, "{v}");
        }
    }

    #[test]
    fn converges_on_a_convex_scalar() {
        let run = |lr: f64| {
            let mut w = vec![1.0];
            let mut opt = Adam::new(1, AdamConfig::with_lr(lr));
            for _ in 0..200 {
                let g = [2.0 * w[0]];
                opt.step(&mut w, &g).unwrap();
            }
            w[0]
        };
        // each step moves at most ~lr, so the default rate only covers 0.2
        let slow = run(1e-3);
        assert!(slow < 1.0 && slow > 0.79, "w = {slow}");
        let fast = run(1e-2);
        assert!(fast.abs() < 0.5, "w = {fast}");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut opt = Adam::new(2, AdamConfig::default());
        assert!(opt.step(&mut [0.0; 3], &[0.0; 3]).is_err());
        assert!(opt.step(&mut [0.0; 2], &[0.0; 1]).is_err());
    }
}
