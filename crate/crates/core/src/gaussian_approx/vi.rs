use std::f64::consts::PI;

use crate::autodiff::Tape;
use crate::base::{Batch, LogPosteriorFn, ParamVector, RngStream};
use crate::error::{Error, Result};
use crate::models::BatchCursor;
use crate::optim::{sgd_momentum_step, SgdHyper, SgdMomentumState};

use super::diag::sample_diag;
use super::{DiagGaussian, GaussianMeta};

/// Default initial log standard deviation.
pub const DEFAULT_LOG_STD: f64 = -3.0;

/// Variational Gaussian `q = N(mean, diag(exp(log_std))²)` plus the state of
/// its SGD-momentum optimizer over the concatenation `[mean; log_std]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ViState {
    pub mean: ParamVector,
    pub log_std: ParamVector,
    pub opt_momenta: ParamVector,
    pub step_count: usize,
    /// Exponential moving average of the per-step NELBO estimates; zero
    /// before the first step.
    pub nelbo_running: f64,
}

impl ViState {
    pub fn new(mean: ParamVector, log_std: ParamVector) -> Result<Self> {
        Error::check_dim(mean.dim(), log_std.dim())?;
        let d = mean.dim();
        Ok(Self {
            mean,
            log_std,
            opt_momenta: ParamVector::zeros(2 * d),
            step_count: 0,
            nelbo_running: 0.0,
        })
    }

    /// All log standard deviations at [`DEFAULT_LOG_STD`].
    pub fn at(mean: ParamVector) -> Self {
        let d = mean.dim();
        Self::new(
            mean,
            ParamVector::filled(d, DEFAULT_LOG_STD).expect("finite"),
        )
        .expect("matching dims")
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn to_gaussian(&self, n: usize) -> Result<DiagGaussian> {
        DiagGaussian::new(
            self.mean.clone(),
            self.log_std.iter().map(|l| (2.0 * l).exp()).collect(),
            GaussianMeta {
                curvature: "variational".into(),
                n,
            },
        )
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Vec<ParamVector> {
        sample_diag(&self.mean, &self.std(), n, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelboConfig {
    pub n_mc: usize,
    /// Stick-the-landing: detach the variational parameters inside `log q`.
    pub stl: bool,
    /// Posterior tempering exponent `T`; the entropy term is weighted by `T`.
    pub temperature: f64,
}

impl NelboConfig {
    pub fn new(n_mc: usize, stl: bool) -> Self {
        Self {
            n_mc,
            stl,
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelboEstimate {
    /// Per-datum NELBO: `E_q[N⁻¹ log q(θ) - L(θ)]` with `L` the normalized
    /// log posterior.
    pub value: f64,
    pub grad_mean: Vec<f64>,
    pub grad_log_std: Vec<f64>,
    /// Per-draw values, for standard errors.
    pub draws: Vec<f64>,
}

impl NelboEstimate {
    pub fn standard_error(&self) -> f64 {
        let n = self.draws.len() as f64;
        if n < 2.0 {
            return f64::NAN;
        }
        let var = self
            .draws
            .iter()
            .map(|v| (v - self.value).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Reparameterized Monte Carlo NELBO and its gradient.
pub fn nelbo(
    model: &dyn LogPosteriorFn,
    q: &ViState,
    batch: &Batch,
    cfg: NelboConfig,
    rng: &mut RngStream,
) -> Result<NelboEstimate> {
    let d = model.dim();
    Error::check_dim(d, q.mean.dim())?;
    if cfg.n_mc < 1 {
        return Err(Error::InvalidHyper(
            "need at least one Monte Carlo draw".into(),
        ));
    }
    let n_total = batch.total_size().max(1) as f64;
    let entropy_weight = cfg.temperature / n_total;
    let mut grad = vec![0.0; 2 * d];
    let mut draws = Vec::with_capacity(cfg.n_mc);
    let mut noise = vec![0.0; d];
    for _ in 0..cfg.n_mc {
        rng.fill_normal(&mut noise);
        let mut tape = Tape::new();
        let mu = tape.inputs(&q.mean);
        let rho = tape.inputs(&q.log_std);
        let mut theta = Vec::with_capacity(d);
        let mut log_q_terms = Vec::with_capacity(d);
        for i in 0..d {
            let s = tape.exp(rho[i]);
            let z = tape.constant(noise[i]);
            let step = tape.mul(s, z);
            let th = tape.add(mu[i], step);
            theta.push(th);
            // log N(θ | μ, s²) without its constant.
            let (centre, log_s) = if cfg.stl {
                (tape.constant(q.mean[i]), tape.constant(q.log_std[i]))
            } else {
                (mu[i], rho[i])
            };
            let r = tape.sub(th, centre);
            let neg_log_s = tape.neg(log_s);
            let inv_s = tape.exp(neg_log_s);
            let u = tape.mul(r, inv_s);
            let u2 = tape.square(u);
            let half = tape.scale(u2, -0.5);
            log_q_terms.push(tape.sub(half, log_s));
        }
        let log_q_raw = tape.sum(&log_q_terms);
        let log_q = tape.add_const(log_q_raw, -0.5 * d as f64 * (2.0 * PI).ln());
        let log_post = model.record(&mut tape, &theta, batch).value;
        let weighted = tape.scale(log_q, entropy_weight);
        let obj = tape.sub(weighted, log_post);
        let value = tape.value(obj);
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "NELBO",
                index: None,
            });
        }
        draws.push(value);
        for (acc, g) in grad.iter_mut().zip(tape.gradient(obj)) {
            *acc += g;
        }
    }
    let k = cfg.n_mc as f64;
    grad.iter_mut().for_each(|g| *g /= k);
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "NELBO gradient",
            index: Some(i % d),
        });
    }
    let value = draws.iter().sum::<f64>() / k;
    let grad_log_std = grad.split_off(d);
    Ok(NelboEstimate {
        value,
        grad_mean: grad,
        grad_log_std,
        draws,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViFit {
    pub state: ViState,
    pub nelbo_curve: Vec<f64>,
}

/// SGD-momentum on `(mean, log_std)` for `epochs` passes over `cursor`.
pub fn fit_vi(
    model: &dyn LogPosteriorFn,
    init: ViState,
    cursor: &mut BatchCursor,
    epochs: usize,
    h: SgdHyper,
    cfg: NelboConfig,
    rng: &mut RngStream,
) -> Result<ViFit> {
    let d = init.mean.dim();
    Error::check_dim(model.dim(), d)?;
    let mut state = init;
    let mut curve = Vec::new();
    for _ in 0..epochs * cursor.batches_per_epoch() {
        let step = state.step_count;
        let batch = cursor.next_batch();
        let est = nelbo(model, &state, &batch, cfg, rng).map_err(|e| e.at_step(step))?;
        let mut joint = state.mean.as_slice().to_vec();
        joint.extend_from_slice(&state.log_std);
        let mut g = est.grad_mean;
        g.extend(est.grad_log_std);
        let opt = SgdMomentumState {
            params: ParamVector::new(joint)?,
            momenta: state.opt_momenta,
            step_count: step,
        };
        let next =
            sgd_momentum_step(&opt, &ParamVector::new(g)?, h).map_err(|e| e.at_step(step))?;
        let mut joint = next.params.into_vec();
        let log_std = joint.split_off(d);
        if let Some(i) = log_std.iter().position(|l| *l > 700.0) {
            return Err(Error::Diverged {
                step,
                reason: format!("log standard deviation {i} overflowed"),
            });
        }
        curve.push(est.value);
        state = ViState {
            mean: ParamVector::new(joint)?,
            log_std: ParamVector::new(log_std)?,
            opt_momenta: next.momenta,
            step_count: step + 1,
            nelbo_running: if step > 0 {
                0.9 * state.nelbo_running + 0.1 * est.value
            } else {
                est.value
            },
        };
    }
    Ok(ViFit {
        state,
        nelbo_curve: curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianPrior, LinearGaussianRegression};

    fn prior_only(mean: f64) -> LinearGaussianRegression {
        LinearGaussianRegression::new(1.0, GaussianPrior::new(vec![mean], vec![1.0]).unwrap())
            .unwrap()
    }

    #[test]
    fn q_equal_to_prior_has_zero_kl() {
        let model = prior_only(0.0);
        let q = ViState::new(ParamVector::zeros(1), ParamVector::zeros(1)).unwrap();
        for stl in [false, true] {
            let est = nelbo(
                &model,
                &q,
                &Batch::empty(0),
                NelboConfig::new(16, stl),
                &mut RngStream::new(0, 0),
            )
            .unwrap();
            assert!(est.value.abs() < 1e-14, "{}", est.value);
            if stl {
                assert!(est.grad_mean[0].abs() < 1e-14);
                assert!(est.grad_log_std[0].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shifted_prior_kl() {
        let model = prior_only(1.0);
        let q = ViState::new(ParamVector::zeros(1), ParamVector::zeros(1)).unwrap();
        let est = nelbo(
            &model,
            &q,
            &Batch::empty(0),
            NelboConfig::new(10_000, false),
            &mut RngStream::new(1, 0),
        )
        .unwrap();
        let se = est.standard_error();
        assert!((est.value - 0.5).abs() < 3.0 * se, "{} ± {se}", est.value);
    }

    #[test]
    fn zero_epochs_leave_state() {
        let model = prior_only(0.0);
        let q = ViState::at(ParamVector::zeros(1));
        let fit = fit_vi(
            &model,
            q.clone(),
            &mut BatchCursor::target(0),
            0,
            SgdHyper::new(0.1, 0.9, 0.0).unwrap(),
            NelboConfig::new(1, true),
            &mut RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(fit.state, q);
        assert!(fit.nelbo_curve.is_empty());
    }

    #[test]
    fn rejects_zero_draws() {
        let model = prior_only(0.0);
        let q = ViState::at(ParamVector::zeros(1));
        assert!(nelbo(
            &model,
            &q,
            &Batch::empty(0),
            NelboConfig::new(0, true),
            &mut RngStream::new(0, 0)
        )
        .is_err());
    }
}
