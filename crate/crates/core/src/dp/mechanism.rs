use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LayerGrad;
use crate::rng::RngStream;

/// Parameters of the first-layer Gaussian mechanism and its budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Clipping bound `C` on the first-layer gradient norm.
    pub clip: f64,
    /// Noise multiplier; the per-coordinate noise std is `σ · 2C`.
    pub sigma: f64,
    pub target_epsilon: f64,
    pub delta: f64,
    /// Sampling rate `B / N`.
    pub sampling_rate: f64,
    /// Number of noised releases accounted for.
    pub steps: u64,
}

impl DpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.clip > 0.0) {
            return bad(format!("clip bound must be positive, got {}", self.clip));
        }
        if !(self.sigma > 0.0) {
            return bad(format!(
                "noise multiplier must be positive, got {}",
                self.sigma
            ));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return bad(format!(
                "sampling rate must lie in (0, 1], got {}",
                self.sampling_rate
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        Ok(())
    }
}

/// Scales `g` by `1 / max(1, ‖g‖/C)`, the norm taken over weights and
/// biases jointly.
pub fn clip_gradients(g: &LayerGrad, clip: f64) -> LayerGrad {
    let norm = g.norm_sq().sqrt();
    let mut out = g.clone();
    let factor = (norm / clip).max(1.0);
    if factor > 1.0 {
        out.scale(1.0 / factor);
    }
    out
}

/// Adds independent `N(0, (σ·2C)²)` noise to every coordinate.
pub fn noise_gradients(g: &LayerGrad, sigma: f64, clip: f64, rng: &mut RngStream) -> LayerGrad {
    let std = sigma * 2.0 * clip;
    let mut out = g.clone();
    for v in out.values_mut() {
        *v += std * rng.normal();
    }
    out
}
