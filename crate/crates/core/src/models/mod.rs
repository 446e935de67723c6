//! Model zoo: priors, likelihoods, synthetic targets and data plumbing.

mod data;
mod likelihood;
mod linear;
mod mlp;
mod prior;
mod targets;

pub use data::{epoch_batches, two_moons, BatchCursor, Dataset};
pub use likelihood::{logsumexp, record_supervised, softmax, Likelihood, SupervisedModel};
pub use linear::{linear_gaussian_regression, ConjugatePosterior, LinearGaussianRegression};
pub use mlp::{mlp_classifier, Activation, Mlp};
pub use prior::GaussianPrior;
pub use targets::{double_well_target, gaussian_target, Moments, SyntheticTarget};
