use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam over a fixed subset of parameters.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    params: Vec<ParamId>,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(ps: &ParamStore<T>, params: Vec<ParamId>, config: AdamConfig) -> Self {
        let m = params.iter().map(|&id| vec![T::zero(); ps.get(id).len()]).collect::<Vec<_>>();
        Self { config, v: m.clone(), m, params, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    /// Applies one update with learning rate `lr` from the gradients in `ps`.
    pub fn step(&mut self, ps: &mut ParamStore<T>, lr: f64) -> Result<()> {
        for &id in &self.params {
            if ps.get(id).grad().is_none() {
                return Err(Error::MissingGradient(ps.name(id).into()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of(self.config.beta1), T::of(self.config.beta2));
        let c1 = T::one() / (T::one() - T::of(libm::pow(self.config.beta1, t as f64)));
        let c2 = T::one() / (T::one() - T::of(libm::pow(self.config.beta2, t as f64)));
        let (lr, eps) = (T::of(lr), T::of(self.config.eps));
        for ((&id, m), v) in self.params.iter().zip(&mut self.m).zip(&mut self.v) {
            let (value, grad) = ps.get_mut(id).data_and_grad_mut();
            let grad = grad.expect("checked above");
            for i in 0..value.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] * c1;
                let v_hat = v[i] * c2;
                value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
