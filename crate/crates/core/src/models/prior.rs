use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::base::{ParamVector, RngStream};
use crate::error::{Error, Result};

/// Diagonal Gaussian prior over the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        Error::check_dim(mean.len(), variance.len())?;
        if let Some(i) = variance.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidHyper(format!(
                "prior variance at {i} must be positive and finite, got {}",
                variance[i]
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite {
                what: "prior mean",
                index: mean.iter().position(|m| !m.is_finite()),
            });
        }
        Ok(Self { mean, variance })
    }

    /// Zero-mean prior with one shared variance.
    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![variance; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    pub fn precision(&self) -> Vec<f64> {
        self.variance.iter().map(|v| 1.0 / v).collect()
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.mean)
            .zip(&self.variance)
            .map(|((t, m), v)| -0.5 * (t - m).powi(2) / v - 0.5 * (2.0 * PI * v).ln())
            .sum()
    }

    pub fn record(&self, tape: &mut Tape, params: &[Var]) -> Var {
        let mut terms = Vec::with_capacity(params.len());
        let mut constant = 0.0;
        for ((&p, &m), &v) in params.iter().zip(&self.mean).zip(&self.variance) {
            let centred = if m == 0.0 { p } else { tape.add_const(p, -m) };
            let sq = tape.square(centred);
            terms.push(tape.scale(sq, -0.5 / v));
            constant -= 0.5 * (2.0 * PI * v).ln();
        }
        let s = tape.sum(&terms);
        tape.add_const(s, constant)
    }

    pub fn sample(&self, rng: &mut RngStream) -> ParamVector {
        let v = self
            .mean
            .iter()
            .zip(&self.variance)
            .map(|(m, var)| m + var.sqrt() * rng.standard_normal())
            .collect();
        ParamVector::new(v).expect("finite prior draw")
    }
}
