//! Vertically federated GAN training for tabular data, with a first-layer
//! Gaussian mechanism, an RDP accountant, synthetic-data metrics and
//! leave-one-out membership-inference auditing.

pub mod audit;
pub mod data;
pub mod dp;
pub mod error;
pub mod fedgan;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RngStream;
