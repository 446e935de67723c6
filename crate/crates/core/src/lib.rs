//! Bayesian learning as pure state transforms.
//!
//! Tempered stochastic-gradient samplers (SGLD, SGHMC, SGNHT) and their
//! zero-temperature optimizer limits, parallel-chain ensembles, diagonal
//! Laplace and variational Gaussian approximations, linearized prediction and
//! entropy-based uncertainty decomposition, all driven by a small reverse-mode
//! AD tape over flat parameter vectors.

pub mod autodiff;
pub mod base;
pub mod ensemble;
pub mod error;
pub mod gaussian_approx;
pub mod io;
pub mod models;
pub mod optim;
pub mod predict;
pub mod sgmcmc;

pub use error::{Error, Result};
