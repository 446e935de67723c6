//! Tempered stochastic-gradient MCMC: SGLD, SGHMC and SGNHT.

mod sampler;
mod schedule;
mod steps;
mod trace;

use serde::{Deserialize, Serialize};

pub use sampler::{build_sampler, ChainState, Sampler, SamplerKind, SamplerState, DIVERGENCE_NORM};
pub use schedule::{schedule_eval, LrSchedule};
pub use steps::{
    sghmc_step, sgld_step, sgnht_step, MomentumHyper, SghmcState, SgldState, SgnhtState,
};
pub use trace::{Collection, SampleTrace};

use crate::error::{Error, Result};

/// Rescaled SDE temperature `𝒯 = T / N`. `1/N` targets the posterior, zero
/// is the optimization limit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::InvalidHyper(format!(
                "temperature must be finite and >= 0, got {value}"
            )))
        }
    }

    /// From a posterior tempering exponent `T` and dataset size `N`.
    pub fn from_tempering(t: f64, n: usize) -> Result<Self> {
        Self::new(t / n.max(1) as f64)
    }

    /// Exact Bayesian posterior for `n` data points.
    pub fn posterior(n: usize) -> Self {
        Self(1.0 / n.max(1) as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Temperature::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}
