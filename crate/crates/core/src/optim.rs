//! Gradient descent with momentum and its exact correspondence with
//! zero-temperature SGHMC.
//!
//! The parameterization is the usual deep-learning one, with the position
//! updated first from the old momenta:
//!
//! ```text
//! θ' = θ + γ m
//! m' = μ m - (1 - τ) ∇U(θ)
//! ```
//!
//! Setting `γ = εσ⁻²`, `μ = 1 - εσ⁻²α`, `τ = 1 - ε` turns this into the SGHMC
//! update at `𝒯 = 0` with `U = -N⁻¹ log π`.

use std::io::Write;
use std::sync::Arc;

use crate::base::{value_and_grad, Batch, LogPosteriorFn, ParamVector, RngStream, Transform};
use crate::error::{Error, Result};
use crate::io::fmt17;
use crate::models::BatchCursor;
use crate::sgmcmc::{MomentumHyper, DIVERGENCE_NORM};

/// Learning rate `γ`, momentum `μ` and dampening `τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdHyper {
    pub lr: f64,
    pub momentum: f64,
    pub dampening: f64,
}

impl SgdHyper {
    pub fn new(lr: f64, momentum: f64, dampening: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidHyper(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        if !(0.0..1.0).contains(&dampening) {
            return Err(Error::InvalidHyper(format!(
                "dampening must lie in [0, 1), got {dampening}"
            )));
        }
        Ok(Self {
            lr,
            momentum,
            dampening,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentumState {
    pub params: ParamVector,
    pub momenta: ParamVector,
    pub step_count: usize,
}

impl SgdMomentumState {
    pub fn new(params: ParamVector) -> Self {
        let d = params.dim();
        Self {
            params,
            momenta: ParamVector::zeros(d),
            step_count: 0,
        }
    }
}

/// One step given the gradient of the loss `U` (not of the log posterior).
pub fn sgd_momentum_step(
    state: &SgdMomentumState,
    grad_u: &ParamVector,
    h: SgdHyper,
) -> Result<SgdMomentumState> {
    let d = state.params.dim();
    Error::check_dim(d, grad_u.dim())?;
    Error::check_dim(d, state.momenta.dim())?;
    let scale = 1.0 - h.dampening;
    let params = (0..d)
        .map(|i| state.params[i] + h.lr * state.momenta[i])
        .collect();
    let momenta = (0..d)
        .map(|i| h.momentum * state.momenta[i] - scale * grad_u[i])
        .collect();
    Ok(SgdMomentumState {
        params: ParamVector::new(params)?,
        momenta: ParamVector::new(momenta).map_err(|_| Error::NonFinite {
            what: "momenta",
            index: None,
        })?,
        step_count: state.step_count + 1,
    })
}

/// `(γ, μ, τ) ↦ (ε, σ⁻², α) = (1 - τ, γ / (1 - τ), (1 - μ) / γ)`
pub fn sgd_to_sghmc(h: SgdHyper) -> Result<(f64, MomentumHyper)> {
    let eps = 1.0 - h.dampening;
    if !(eps > 0.0) {
        return Err(Error::InvalidHyper(
            "dampening of 1 gives a zero step size".into(),
        ));
    }
    let hyper = MomentumHyper::new(h.lr / eps, (1.0 - h.momentum) / h.lr)?;
    Ok((eps, hyper))
}

/// `(ε, σ⁻², α) ↦ (γ, μ, τ) = (εσ⁻², 1 - εσ⁻²α, 1 - ε)`
pub fn sghmc_to_sgd(eps: f64, hyper: MomentumHyper) -> Result<SgdHyper> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidHyper(format!(
            "step size must lie in (0, 1] to map onto dampening, got {eps}"
        )));
    }
    let lr = eps * hyper.inv_sigma_sq;
    SgdHyper::new(lr, 1.0 - lr * hyper.alpha, 1.0 - eps)
}

/// SGD-momentum as a transform minimizing `U = -(normalized log posterior)`.
#[derive(Clone)]
pub struct SgdMomentum {
    model: Arc<dyn LogPosteriorFn>,
    hyper: SgdHyper,
}

/// Optimizer state plus the loss seen at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct MapState {
    pub opt: SgdMomentumState,
    pub loss_curve: Vec<f64>,
}

impl SgdMomentum {
    pub fn new(model: Arc<dyn LogPosteriorFn>, hyper: SgdHyper) -> Self {
        Self { model, hyper }
    }
}

impl Transform for SgdMomentum {
    type State = MapState;

    fn init(&self, params: ParamVector) -> MapState {
        MapState {
            opt: SgdMomentumState::new(params),
            loss_curve: Vec::new(),
        }
    }

    fn update(&self, state: MapState, batch: &Batch, _rng: &mut RngStream) -> Result<MapState> {
        let MapState {
            opt,
            mut loss_curve,
        } = state;
        let step = opt.step_count;
        let (lp, g) =
            value_and_grad(self.model.as_ref(), &opt.params, batch).map_err(|e| e.at_step(step))?;
        let grad_u = g.scale(-1.0)?;
        let opt = sgd_momentum_step(&opt, &grad_u, self.hyper).map_err(|e| e.at_step(step))?;
        if opt.params.norm() > DIVERGENCE_NORM {
            return Err(Error::Diverged {
                step,
                reason: format!("parameter norm exceeded {DIVERGENCE_NORM:e}"),
            });
        }
        loss_curve.push(-lp.value);
        Ok(MapState { opt, loss_curve })
    }
}

/// Final parameters of a MAP (or, with a flat prior, MLE) fit.
#[derive(Debug, Clone, PartialEq)]
pub struct MapFit {
    pub params: ParamVector,
    pub loss_curve: Vec<f64>,
}

impl MapFit {
    /// CSV `step,loss`.
    pub fn write_loss_csv<W: Write>(&self, out: W) -> Result<()> {
        write_loss_curve(&self.loss_curve, out)
    }
}

pub fn write_loss_curve<W: Write>(losses: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "loss"])?;
    for (k, l) in losses.iter().enumerate() {
        w.write_record([k.to_string(), fmt17(*l)])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `epochs` passes of SGD-momentum over `cursor`.
pub fn fit_map(
    model: Arc<dyn LogPosteriorFn>,
    init: ParamVector,
    h: SgdHyper,
    epochs: usize,
    cursor: &mut BatchCursor,
) -> Result<MapFit> {
    Error::check_dim(model.dim(), init.dim())?;
    let opt = SgdMomentum::new(model, h);
    let mut rng = RngStream::new(0, 0);
    let mut state = opt.init(init);
    for _ in 0..epochs * cursor.batches_per_epoch() {
        let batch = cursor.next_batch();
        state = opt.update(state, &batch, &mut rng)?;
    }
    Ok(MapFit {
        params: state.opt.params,
        loss_curve: state.loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::gaussian_target;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn vanilla_sgd_over_two_steps() {
        let h = SgdHyper::new(0.1, 0.0, 0.0).unwrap();
        let s = SgdMomentumState::new(pv(&[0.0]));
        let s1 = sgd_momentum_step(&s, &pv(&[1.0]), h).unwrap();
        assert_eq!((s1.params[0], s1.momenta[0]), (0.0, -1.0));
        let s2 = sgd_momentum_step(&s1, &pv(&[1.0]), h).unwrap();
        assert_eq!(s2.params[0], -0.1);
    }

    #[test]
    fn pure_momentum_decay_and_fixed_point() {
        let h = SgdHyper::new(1.0, 0.9, 0.0).unwrap();
        let s = SgdMomentumState {
            momenta: pv(&[1.0]),
            ..SgdMomentumState::new(pv(&[2.0]))
        };
        let n = sgd_momentum_step(&s, &pv(&[0.0]), h).unwrap();
        assert_eq!((n.params[0], n.momenta[0]), (3.0, 0.9));

        let s = SgdMomentumState::new(pv(&[2.0, -1.0]));
        let n = sgd_momentum_step(&s, &pv(&[0.0, 0.0]), h).unwrap();
        assert_eq!(n.params, s.params);
        assert_eq!(n.momenta, s.momenta);
    }

    #[test]
    fn hyper_maps() {
        let (eps, h) = sgd_to_sghmc(SgdHyper::new(0.1, 0.9, 0.9).unwrap()).unwrap();
        assert!((eps - 0.1).abs() < 1e-12);
        assert!((h.inv_sigma_sq - 1.0).abs() < 1e-12);
        assert!((h.alpha - 1.0).abs() < 1e-12);

        let s = sghmc_to_sgd(0.05, MomentumHyper::new(2.0, 0.5).unwrap()).unwrap();
        assert!((s.lr - 0.1).abs() < 1e-15);
        assert!((s.momentum - 0.95).abs() < 1e-15);
        assert!((s.dampening - 0.95).abs() < 1e-15);

        // Dyadic values map exactly in both directions.
        let h0 = SgdHyper::new(0.125, 0.75, 0.875).unwrap();
        let (eps, m) = sgd_to_sghmc(h0).unwrap();
        assert_eq!((eps, m.inv_sigma_sq, m.alpha), (0.125, 1.0, 2.0));
        assert_eq!(sghmc_to_sgd(eps, m).unwrap(), h0);
    }

    #[test]
    fn hyper_validation() {
        assert!(SgdHyper::new(0.1, 1.0, 0.0).is_err());
        assert!(SgdHyper::new(0.0, 0.5, 0.0).is_err());
        assert!(SgdHyper::new(0.1, 0.5, 1.0).is_err());
        assert!(sghmc_to_sgd(0.1, MomentumHyper::new(1.0, 0.0).unwrap()).is_err());
    }

    #[test]
    fn quadratic_converges() {
        let target = Arc::new(gaussian_target(vec![3.0], vec![1.0]).unwrap());
        let h = SgdHyper::new(0.05, 0.0, 0.0).unwrap();
        let fit = fit_map(target, pv(&[0.0]), h, 500, &mut BatchCursor::target(1)).unwrap();
        assert!((fit.params[0] - 3.0).abs() < 1e-3, "{}", fit.params[0]);
        assert_eq!(fit.loss_curve.len(), 500);
        assert!(fit.loss_curve.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let target = Arc::new(gaussian_target(vec![3.0], vec![1.0]).unwrap());
        let h = SgdHyper::new(0.05, 0.5, 0.0).unwrap();
        let fit = fit_map(target, pv(&[3.0]), h, 0, &mut BatchCursor::target(1)).unwrap();
        assert_eq!(fit.params, pv(&[3.0]));
    }
}
