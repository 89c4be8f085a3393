use serde::{Deserialize, Serialize};

use super::{ParamTensor, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.00017,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for an ordered list of tensors.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    shapes: Vec<Vec<usize>>,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, params: &[&ParamTensor<T>]) -> Self {
        Self {
            config,
            step: 0,
            shapes: params.iter().map(|p| p.shape.clone()).collect(),
            first: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            second: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    /// Applies one bias-corrected update from the accumulated gradients, then clears them.
    ///
    /// Fails without touching any tensor if a gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut ParamTensor<T>]) -> Result<()> {
        if params.len() != self.shapes.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {}",
                self.shapes.len(),
                params.len()
            )));
        }
        for (p, shape) in params.iter().zip(&self.shapes) {
            if &p.shape != shape {
                return Err(Error::Shape(format!(
                    "`{}` has shape {:?}, optimizer expects {shape:?}",
                    p.name, p.shape
                )));
            }
            if !p.grad.iter().all(|g| g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of `{}`", p.name)));
            }
        }

        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one_b1 = T::from_f64(1.0 - c.beta1);
        let one_b2 = T::from_f64(1.0 - c.beta2);
        let bias1 = T::from_f64(1.0 / (1.0 - c.beta1.powi(t)));
        let bias2 = T::from_f64(1.0 / (1.0 - c.beta2.powi(t)));
        let lr = T::from_f64(c.learning_rate);
        let eps = T::from_f64(c.epsilon);

        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let p = &mut **p;
            for (((w, g), m), v) in p
                .values
                .iter_mut()
                .zip(p.grad.iter_mut())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = b1 * *m + one_b1 * *g;
                *v = b2 * *v + one_b2 * *g * *g;
                let m_hat = *m * bias1;
                let v_hat = *v * bias2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
                *g = T::zero();
            }
        }
        Ok(())
    }
}
