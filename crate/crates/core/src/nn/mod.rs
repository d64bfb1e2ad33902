//! Dense networks with exact gradients, including the second-order path
//! needed by the WGAN gradient penalty.

mod adam;
mod head;
mod matrix;
mod mlp;
mod penalty;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use head::{argmax, gumbel_softmax, softmax_backward, softmax_rows, HeadBlock, OutputHead};
pub use matrix::Matrix;
pub use mlp::{Activation, GradSet, Layer, LayerGrad, Mlp, Tape, DEFAULT_LEAKY_SLOPE};
pub use penalty::{
    draw_betas, gradient_penalty, interpolate, interpolate_with, PenaltyOutput, NORM_GUARD,
};
