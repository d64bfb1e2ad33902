use serde::{Deserialize, Serialize};

use crate::dp::{clip_gradients, noise_gradients, DpConfig};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, GradSet, Matrix, Mlp};
use crate::rng::RngStream;

/// Random streams owned by one party. `shared` is the same stream at every
/// party, which keeps batch indices and latent draws aligned without any
/// communication.
#[derive(Debug, Clone)]
pub(crate) struct PartyStreams {
    pub shared: RngStream,
    pub gumbel: RngStream,
    pub interp: RngStream,
    pub noise: RngStream,
}

impl PartyStreams {
    pub fn new(rng: &RngStream, party: usize) -> Self {
        let p = party as u64;
        Self {
            shared: rng.child("shared", 0, 0),
            gumbel: rng.child("gumbel", p, 0),
            interp: rng.child("interp", p, 0),
            noise: rng.child("dp-noise", p, 0),
        }
    }
}

/// A parameter slice that went through the Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivatizedSlice {
    pub party: usize,
    pub network: &'static str,
    pub layer: usize,
}

/// Outcome of one critic iteration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscReport {
    /// Party critic losses; `None` where a party has no scoring critic.
    pub party_losses: Vec<Option<f64>>,
    pub server_loss: Option<f64>,
    pub privatized: Vec<PrivatizedSlice>,
}

pub(crate) fn mean_score(out: &Matrix) -> f64 {
    out.column_sums()[0] / out.rows() as f64
}

pub(crate) fn score_grad(rows: usize, weight: f64) -> Matrix {
    Matrix::filled(rows, 1, weight / rows as f64)
}

pub(crate) fn privatize_first_layer(grads: &mut GradSet, dp: &DpConfig, rng: &mut RngStream) {
    let clipped = clip_gradients(&grads.layers[0], dp.clip);
    grads.layers[0] = noise_gradients(&clipped, dp.sigma, dp.clip, rng);
}

pub(crate) fn update(mlp: &mut Mlp, grads: &GradSet, state: &mut AdamState, lr: f64) -> Result<()> {
    adam_step(mlp, grads, state, &AdamConfig::with_lr(lr))
}

pub(crate) fn ensure_finite(value: f64, epoch: usize, role: impl Into<String>) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            epoch,
            role: role.into(),
        })
    }
}

pub(crate) fn ensure_finite_grads(
    g: &GradSet,
    epoch: usize,
    role: impl Into<String>,
) -> Result<()> {
    if g.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            epoch,
            role: role.into(),
        })
    }
}

pub(crate) fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = Vec::with_capacity(hidden.len() + 2);
    w.push(input);
    w.extend_from_slice(hidden);
    w.push(output);
    w
}
