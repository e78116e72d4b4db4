use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{lit, Model, Scalar};

/// Cosine annealing with warm restarts, stepped once per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub lr_max: f64,
    pub lr_min: f64,
    /// Length of the first period, in epochs.
    pub period: usize,
    /// Each period is this many times longer than the previous one.
    pub period_mult: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            lr_max: 1e-3,
            lr_min: 0.0,
            period: 10,
            period_mult: 2,
        }
    }
}

pub fn lr_at(schedule: &Schedule, epoch: usize) -> f64 {
    let mut start = 0;
    let mut len = schedule.period.max(1);
    while epoch >= start + len {
        start += len;
        len *= schedule.period_mult.max(1);
    }
    let t = (epoch - start) as f64 / len as f64;
    schedule.lr_min + 0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + (PI * t).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Array2<T>>,
    v: Vec<Array2<T>>,
    steps: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(model: &Model<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Array2<T>> = model.tensors().iter().map(|(_, t)| Array2::zeros(t.dim())).collect();
        Adam {
            config,
            m: zeros.clone(),
            v: zeros,
            steps: 0,
        }
    }

    /// Bias-corrected update. A non-finite gradient leaves everything untouched.
    pub fn step(&mut self, model: &mut Model<T>, grad: &Model<T>, lr: f64) -> Result<()> {
        let grads = grad.tensors();
        if grads.iter().any(|(_, g)| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.steps += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let (b1, b2, eps): (T, T, T) = (lit(beta1), lit(beta2), lit(eps));
        let one = T::one();
        let c1 = one - b1.powi(self.steps);
        let c2 = one - b2.powi(self.steps);
        let lr: T = lit(lr);
        for (((p, (_, g)), m), v) in model.tensors_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}

/// Scales `grad` so its global L2 norm is at most `max_norm`; returns the
/// norm before scaling.
pub fn clip_global_norm<T: Scalar>(grad: &mut Model<T>, max_norm: f64) -> f64 {
    let norm = grad
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|v| {
            let v = v.to_f64().unwrap_or(f64::NAN);
            v * v
        })
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale: T = lit(max_norm / norm);
        for t in grad.tensors_mut() {
            t.mapv_inplace(|v| v * scale);
        }
    }
    norm
}
