//! Diagonal Gaussian posterior approximations: Laplace (empirical Fisher or
//! GGN curvature) and reparameterized variational inference.

mod diag;
mod fisher;
mod laplace;
mod vi;

pub use diag::{DiagGaussian, GaussianMeta};
pub use fisher::{empirical_fisher_diag, fisher_diag_from_grads, ggn_diag, loss_hessian};
pub use laplace::{fit_laplace, Curvature};
pub use vi::{fit_vi, nelbo, NelboConfig, NelboEstimate, ViFit, ViState, DEFAULT_LOG_STD};
