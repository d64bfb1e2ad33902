//! First-layer Gaussian mechanism and Rényi-DP accounting.

mod mechanism;
mod rdp;

pub use mechanism::{clip_gradients, noise_gradients, DpConfig};
pub use rdp::{
    calibrate, compose, epsilon_for, gaussian_rdp, gaussian_rdp_to, report, subsample_amplify,
    to_dp, AccountantReport, RdpCurve, ALPHA_MAX, SIGMA_MAX, SIGMA_MIN,
};
