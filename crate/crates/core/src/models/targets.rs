use std::f64::consts::PI;

use crate::autodiff::{Tape, Var};
use crate::base::{Batch, LogPosteriorFn, ParamVector, Recorded};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Density {
    /// `-c (θ₁² - a)² - c θ₂²`
    DoubleWell { a: f64, c: f64 },
    /// Independent Gaussian coordinates.
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
}

/// A closed-form log density with no data attached. It is treated as a
/// posterior over a dataset of size one, so its normalized log posterior is
/// the log density itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTarget {
    density: Density,
    modes: Vec<ParamVector>,
}

/// Analytic mean and diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl SyntheticTarget {
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        match &self.density {
            Density::DoubleWell { a, c } => {
                -c * (theta[0] * theta[0] - a).powi(2) - c * theta[1] * theta[1]
            }
            Density::Gaussian { mean, variance } => theta
                .iter()
                .zip(mean)
                .zip(variance)
                .map(|((t, m), v)| -0.5 * (t - m).powi(2) / v - 0.5 * (2.0 * PI * v).ln())
                .sum(),
        }
    }

    pub fn analytic_moments(&self) -> Option<Moments> {
        match &self.density {
            Density::Gaussian { mean, variance } => Some(Moments {
                mean: mean.clone(),
                variance: variance.clone(),
            }),
            Density::DoubleWell { .. } => None,
        }
    }

    /// Known local maxima (empty when not tracked).
    pub fn mode_set(&self) -> &[ParamVector] {
        &self.modes
    }

    fn record_density(&self, tape: &mut Tape, p: &[Var]) -> Var {
        match &self.density {
            Density::DoubleWell { a, c } => {
                let x2 = tape.square(p[0]);
                let shifted = tape.add_const(x2, -a);
                let well = tape.square(shifted);
                let y2 = tape.square(p[1]);
                let s = tape.add(well, y2);
                tape.scale(s, -c)
            }
            Density::Gaussian { mean, variance } => {
                let mut terms = Vec::with_capacity(p.len());
                let mut constant = 0.0;
                for ((&pi, &m), &v) in p.iter().zip(mean).zip(variance) {
                    let r = tape.add_const(pi, -m);
                    let sq = tape.square(r);
                    terms.push(tape.scale(sq, -0.5 / v));
                    constant -= 0.5 * (2.0 * PI * v).ln();
                }
                let s = tape.sum(&terms);
                tape.add_const(s, constant)
            }
        }
    }
}

impl LogPosteriorFn for SyntheticTarget {
    fn dim(&self) -> usize {
        match &self.density {
            Density::DoubleWell { .. } => 2,
            Density::Gaussian { mean, .. } => mean.len(),
        }
    }

    fn record(&self, tape: &mut Tape, params: &[Var], batch: &Batch) -> Recorded {
        let lp = self.record_density(tape, params);
        let n = batch.total_size().max(1);
        let value = if n == 1 {
            lp
        } else {
            tape.scale(lp, 1.0 / n as f64)
        };
        Recorded {
            value,
            aux: Vec::new(),
        }
    }
}

/// Bimodal 2-D density with modes at `(±√a, 0)`.
pub fn double_well_target(a: f64, c: f64) -> Result<SyntheticTarget> {
    if !(a > 0.0 && c > 0.0) {
        return Err(Error::InvalidHyper(format!(
            "double well needs a, c > 0 (got {a}, {c})"
        )));
    }
    let r = a.sqrt();
    Ok(SyntheticTarget {
        density: Density::DoubleWell { a, c },
        modes: vec![
            ParamVector::new(vec![-r, 0.0])?,
            ParamVector::new(vec![r, 0.0])?,
        ],
    })
}

/// Independent Gaussian target; its single mode is the mean.
pub fn gaussian_target(mean: Vec<f64>, variance: Vec<f64>) -> Result<SyntheticTarget> {
    Error::check_dim(mean.len(), variance.len())?;
    if variance.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidHyper(
            "target variances must be positive".into(),
        ));
    }
    Ok(SyntheticTarget {
        modes: vec![ParamVector::new(mean.clone())?],
        density: Density::Gaussian { mean, variance },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::value_and_grad;

    fn eval(t: &SyntheticTarget, th: &[f64]) -> (f64, Vec<f64>) {
        let (r, g) =
            value_and_grad(t, &ParamVector::new(th.to_vec()).unwrap(), &Batch::empty(1)).unwrap();
        (r.value, g.into_vec())
    }

    #[test]
    fn double_well_values() {
        let t = double_well_target(1.0, 1.0).unwrap();
        assert_eq!(eval(&t, &[1.0, 0.0]), (0.0, vec![0.0, 0.0]));
        assert_eq!(eval(&t, &[0.0, 0.0]).0, -1.0);
        let (_, g) = eval(&t, &[0.5, 0.5]);
        assert!((g[0] - 1.5).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
        assert_eq!(t.mode_set().len(), 2);
    }

    #[test]
    fn double_well_validation() {
        assert!(double_well_target(0.0, 1.0).is_err());
        assert!(double_well_target(1.0, -2.0).is_err());
    }

    #[test]
    fn gaussian_moments_exposed() {
        let t = gaussian_target(vec![3.0], vec![1.0]).unwrap();
        assert_eq!(t.analytic_moments().unwrap().mean, vec![3.0]);
        let (_, g) = eval(&t, &[1.0]);
        assert_eq!(g, vec![2.0]);
    }
}
