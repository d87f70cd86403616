//! Conditional extremograms for stochastic volatility processes
//! `Y_j = σ(X_j) Z_j` with heavy-tailed innovations and a latent Gaussian
//! driver that may have long memory.

pub mod cones;
pub mod error;
pub mod estimators;
pub mod gp_sim;
pub mod harness;
pub mod hermite;
pub mod limits;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod sv_model;
pub mod tails;

pub use error::{Error, Result};
