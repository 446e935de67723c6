use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size schedule `ε_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum LrSchedule {
    Constant {
        a: f64,
    },
    /// `ε_t = a (b + t)^(-gamma)`
    Polynomial {
        a: f64,
        b: f64,
        gamma: f64,
    },
}

impl LrSchedule {
    pub fn constant(a: f64) -> Result<Self> {
        let s = LrSchedule::Constant { a };
        s.validate(false)?;
        Ok(s)
    }

    /// With `robbins_monro` set, `gamma` must lie in `(0.5, 1]` so that
    /// `Σ ε_t = ∞` and `Σ ε_t² < ∞`.
    pub fn polynomial(a: f64, b: f64, gamma: f64, robbins_monro: bool) -> Result<Self> {
        let s = LrSchedule::Polynomial { a, b, gamma };
        s.validate(robbins_monro)?;
        Ok(s)
    }

    pub fn validate(&self, robbins_monro: bool) -> Result<()> {
        match *self {
            LrSchedule::Constant { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::InvalidHyper(format!(
                        "step size must be positive, got {a}"
                    )));
                }
                if robbins_monro {
                    return Err(Error::InvalidHyper(
                        "a constant step size does not satisfy the Robbins-Monro conditions".into(),
                    ));
                }
            }
            LrSchedule::Polynomial { a, b, gamma } => {
                if !(a > 0.0 && a.is_finite())
                    || !(b > 0.0 || (b == 0.0 && gamma == 0.0))
                    || !(gamma >= 0.0)
                {
                    return Err(Error::InvalidHyper(format!(
                        "polynomial schedule needs a > 0, b > 0, gamma >= 0 (got {a}, {b}, {gamma})"
                    )));
                }
                if robbins_monro && !(gamma > 0.5 && gamma <= 1.0) {
                    return Err(Error::InvalidHyper(format!(
                        "Robbins-Monro decay needs gamma in (0.5, 1], got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: usize) -> f64 {
        match *self {
            LrSchedule::Constant { a } => a,
            LrSchedule::Polynomial { a, b, gamma } => a * (b + t as f64).powf(-gamma),
        }
    }
}

/// Free-function form of [`LrSchedule::eval`].
pub fn schedule_eval(s: &LrSchedule, t: usize) -> f64 {
    s.eval(t)
}
