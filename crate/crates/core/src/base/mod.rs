//! Shared vocabulary: parameter vectors, batches, random streams and the
//! state-transform contract every algorithm implements.

mod batch;
mod params;
mod rng;
mod transform;

pub use batch::Batch;
pub use params::ParamVector;
pub use rng::{gaussian_noise, RngStream};
pub use transform::{
    normalized_log_posterior, value_and_grad, LogPosteriorFn, LogPosteriorResult, Recorded,
    Transform,
};
