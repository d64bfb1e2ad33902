use serde::{Deserialize, Serialize};

use super::mlp::{GradSet, Mlp};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: GradSet,
    pub v: GradSet,
    pub t: u64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        Self {
            m: GradSet::zeros_like(mlp),
            v: GradSet::zeros_like(mlp),
            t: 0,
        }
    }
}

pub fn adam_step(
    mlp: &mut Mlp,
    grads: &GradSet,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if !grads.is_congruent(mlp) {
        return Err(shape_err(
            "adam_step",
            "gradients congruent with the network",
            "mismatch",
        ));
    }
    if !state.m.is_congruent(mlp) {
        return Err(shape_err(
            "adam_step",
            "optimizer state congruent with the network",
            "mismatch",
        ));
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let g_all = grads.layers.iter().flat_map(|l| l.values());
    let m_all = state.m.layers.iter_mut().flat_map(|l| l.values_mut());
    let v_all = state.v.layers.iter_mut().flat_map(|l| l.values_mut());
    for (((p, g), m), v) in mlp.params_mut().zip(g_all).zip(m_all).zip(v_all) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}
