//! Euler–Maruyama updates of the tempered SGLD, SGHMC and SGNHT dynamics.
//!
//! `grad` is always the gradient of the batch-normalized log posterior, an
//! estimate of `N⁻¹ ∇ log π(θ)`. Updates apply in listing order: θ with the
//! old momenta, then m, then ξ. No random numbers are drawn at zero
//! temperature.

use crate::base::{ParamVector, RngStream};
use crate::error::{Error, Result};

use super::Temperature;

#[derive(Debug, Clone, PartialEq)]
pub struct SgldState {
    pub params: ParamVector,
    pub step_count: usize,
    pub last_log_post: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SghmcState {
    pub params: ParamVector,
    pub momenta: ParamVector,
    pub step_count: usize,
    pub last_log_post: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnhtState {
    pub params: ParamVector,
    pub momenta: ParamVector,
    pub thermostat: f64,
    pub step_count: usize,
    pub last_log_post: f64,
}

/// Momentum scale (stored as σ⁻²) and friction α shared by SGHMC and SGNHT.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MomentumHyper {
    pub inv_sigma_sq: f64,
    pub alpha: f64,
}

impl MomentumHyper {
    pub fn new(inv_sigma_sq: f64, alpha: f64) -> Result<Self> {
        if !(inv_sigma_sq > 0.0 && inv_sigma_sq.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "sigma^-2 must be positive, got {inv_sigma_sq}"
            )));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "friction must be non-negative, got {alpha}"
            )));
        }
        Ok(Self {
            inv_sigma_sq,
            alpha,
        })
    }

    pub fn from_sigma(sigma: f64, alpha: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidHyper(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Self::new(1.0 / (sigma * sigma), alpha)
    }
}

impl SgldState {
    pub fn new(params: ParamVector) -> Self {
        Self {
            params,
            step_count: 0,
            last_log_post: f64::NAN,
        }
    }
}

impl SghmcState {
    /// Zero initial momenta.
    pub fn new(params: ParamVector) -> Self {
        let d = params.dim();
        Self {
            params,
            momenta: ParamVector::zeros(d),
            step_count: 0,
            last_log_post: f64::NAN,
        }
    }
}

impl SgnhtState {
    /// Zero momenta; the thermostat starts at its target mean `α`.
    pub fn new(params: ParamVector, alpha: f64) -> Self {
        let d = params.dim();
        Self {
            params,
            momenta: ParamVector::zeros(d),
            thermostat: alpha,
            step_count: 0,
            last_log_post: f64::NAN,
        }
    }
}

fn check_step(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidHyper(format!(
            "step size must be positive, got {eps}"
        )))
    }
}

/// `θ' = θ + ε ĝ + √(2ε𝒯) ζ`
pub fn sgld_step(
    state: &SgldState,
    grad: &ParamVector,
    eps: f64,
    temperature: Temperature,
    rng: &mut RngStream,
) -> Result<SgldState> {
    Error::check_dim(state.params.dim(), grad.dim())?;
    check_step(eps)?;
    let t = temperature.value();
    let noise = (2.0 * eps * t).sqrt();
    let params = state
        .params
        .iter()
        .zip(grad.iter())
        .map(|(&th, &g)| {
            let drift = th + eps * g;
            if t > 0.0 {
                drift + noise * rng.standard_normal()
            } else {
                drift
            }
        })
        .collect();
    Ok(SgldState {
        params: ParamVector::new(params)?,
        step_count: state.step_count + 1,
        last_log_post: state.last_log_post,
    })
}

/// `θ' = θ + εσ⁻² m`, `m' = (1 - εσ⁻²α) m + ε ĝ + √(2ε𝒯α) ζ`
pub fn sghmc_step(
    state: &SghmcState,
    grad: &ParamVector,
    eps: f64,
    hyper: MomentumHyper,
    temperature: Temperature,
    rng: &mut RngStream,
) -> Result<SghmcState> {
    let d = state.params.dim();
    Error::check_dim(d, grad.dim())?;
    Error::check_dim(d, state.momenta.dim())?;
    check_step(eps)?;
    let t = temperature.value();
    let drift = eps * hyper.inv_sigma_sq;
    let decay = 1.0 - drift * hyper.alpha;
    let noise = (2.0 * eps * t * hyper.alpha).sqrt();
    let mut params = Vec::with_capacity(d);
    let mut momenta = Vec::with_capacity(d);
    for i in 0..d {
        let m = state.momenta[i];
        params.push(state.params[i] + drift * m);
        let mut m_new = decay * m + eps * grad[i];
        if t > 0.0 {
            m_new += noise * rng.standard_normal();
        }
        momenta.push(m_new);
    }
    Ok(SghmcState {
        params: ParamVector::new(params)?,
        momenta: ParamVector::new(momenta).map_err(|_| Error::NonFinite {
            what: "momenta",
            index: None,
        })?,
        step_count: state.step_count + 1,
        last_log_post: state.last_log_post,
    })
}

/// `θ' = θ + εσ⁻² m`, `m' = m + ε ĝ - εσ⁻² ξ m + √(2ε𝒯α) ζ`,
/// `ξ' = ξ + ε (σ⁻² d⁻¹ mᵀm - 𝒯)`
pub fn sgnht_step(
    state: &SgnhtState,
    grad: &ParamVector,
    eps: f64,
    hyper: MomentumHyper,
    temperature: Temperature,
    rng: &mut RngStream,
) -> Result<SgnhtState> {
    let d = state.params.dim();
    Error::check_dim(d, grad.dim())?;
    Error::check_dim(d, state.momenta.dim())?;
    check_step(eps)?;
    let t = temperature.value();
    if t == 0.0 && state.step_count == 0 {
        log::warn!(
            "SGNHT at zero temperature: the thermostat only grows and the dynamics do not optimize"
        );
    }
    let drift = eps * hyper.inv_sigma_sq;
    let friction = drift * state.thermostat;
    let noise = (2.0 * eps * t * hyper.alpha).sqrt();
    let mut params = Vec::with_capacity(d);
    let mut momenta = Vec::with_capacity(d);
    let mut kinetic = 0.0;
    for i in 0..d {
        let m = state.momenta[i];
        kinetic += m * m;
        params.push(state.params[i] + drift * m);
        let mut m_new = m + eps * grad[i] - friction * m;
        if t > 0.0 && noise > 0.0 {
            m_new += noise * rng.standard_normal();
        }
        momenta.push(m_new);
    }
    let thermostat = state.thermostat + eps * (hyper.inv_sigma_sq * kinetic / d as f64 - t);
    if !thermostat.is_finite() {
        return Err(Error::NonFinite {
            what: "thermostat",
            index: None,
        });
    }
    Ok(SgnhtState {
        params: ParamVector::new(params)?,
        momenta: ParamVector::new(momenta).map_err(|_| Error::NonFinite {
            what: "momenta",
            index: None,
        })?,
        thermostat,
        step_count: state.step_count + 1,
        last_log_post: state.last_log_post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sgld_cold_examples() {
        let mut rng = RngStream::new(0, 0);
        let s = SgldState::new(pv(&[0.0, 0.0]));
        let n = sgld_step(&s, &pv(&[1.0, -2.0]), 0.1, Temperature::ZERO, &mut rng).unwrap();
        assert_eq!(n.params.as_slice(), &[0.1, -0.2]);
        let s = SgldState::new(pv(&[1.0]));
        let n = sgld_step(&s, &pv(&[0.0]), 0.01, Temperature::ZERO, &mut rng).unwrap();
        assert_eq!(n.params.as_slice(), &[1.0]);
        assert_eq!(n.step_count, 1);
    }

    #[test]
    fn zero_temperature_draws_nothing() {
        let mut rng = RngStream::new(3, 1);
        let before = rng.clone();
        let s = SghmcState {
            momenta: pv(&[0.5]),
            ..SghmcState::new(pv(&[0.2]))
        };
        let h = MomentumHyper::new(1.0, 1.0).unwrap();
        sghmc_step(&s, &pv(&[0.3]), 0.1, h, Temperature::ZERO, &mut rng).unwrap();
        sgld_step(
            &SgldState::new(pv(&[0.2])),
            &pv(&[0.3]),
            0.1,
            Temperature::ZERO,
            &mut rng,
        )
        .unwrap();
        assert_eq!(rng.standard_normal(), before.clone().standard_normal());
    }

    #[test]
    fn sghmc_substitution() {
        let mut rng = RngStream::new(0, 0);
        let s = SghmcState {
            momenta: pv(&[1.0]),
            ..SghmcState::new(pv(&[0.0]))
        };
        let h = MomentumHyper::from_sigma(1.0, 1.0).unwrap();
        let n = sghmc_step(&s, &pv(&[0.0]), 0.1, h, Temperature::ZERO, &mut rng).unwrap();
        assert_eq!(n.params.as_slice(), &[0.1]);
        assert!((n.momenta[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sgnht_thermostat_updates() {
        let mut rng = RngStream::new(0, 0);
        let h = MomentumHyper::from_sigma(1.0, 0.0).unwrap();
        let s = SgnhtState::new(pv(&[0.0, 0.0]), 0.0);
        let t1 = Temperature::new(1.0).unwrap();
        let n = sgnht_step(&s, &pv(&[0.0, 0.0]), 0.1, h, t1, &mut rng).unwrap();
        assert!((n.thermostat + 0.1).abs() < 1e-15);

        // σ⁻² d⁻¹ mᵀm = 𝒯 is a fixed point of the thermostat.
        let s = SgnhtState {
            momenta: pv(&[1.0, 1.0]),
            thermostat: 0.3,
            ..SgnhtState::new(pv(&[0.0, 0.0]), 0.0)
        };
        let n = sgnht_step(&s, &pv(&[0.0, 0.0]), 0.1, h, t1, &mut rng).unwrap();
        assert_eq!(n.thermostat, 0.3);
    }

    #[test]
    fn sgnht_cold_thermostat_never_decreases() {
        let mut rng = RngStream::new(0, 0);
        let h = MomentumHyper::from_sigma(1.0, 0.1).unwrap();
        let mut s = SgnhtState::new(pv(&[1.0, -1.0]), 0.1);
        for _ in 0..50 {
            let g = pv(&[-s.params[0], -s.params[1]]);
            let n = sgnht_step(&s, &g, 0.05, h, Temperature::ZERO, &mut rng).unwrap();
            assert!(n.thermostat >= s.thermostat);
            s = n;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = RngStream::new(0, 0);
        let s = SgldState::new(pv(&[0.0]));
        assert!(sgld_step(&s, &pv(&[0.0, 1.0]), 0.1, Temperature::ZERO, &mut rng).is_err());
        assert!(sgld_step(&s, &pv(&[0.0]), 0.0, Temperature::ZERO, &mut rng).is_err());
        assert!(MomentumHyper::from_sigma(0.0, 1.0).is_err());
        assert!(MomentumHyper::new(1.0, -1.0).is_err());
        let huge = sgld_step(&s, &pv(&[f64::MAX]), 10.0, Temperature::ZERO, &mut rng);
        assert!(matches!(huge, Err(Error::NonFinite { .. })));
    }
}
