use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::autodiff::{Tape, Var};
use crate::base::{Batch, LogPosteriorFn, ParamVector, Recorded};
use crate::error::{Error, Result};

use super::{record_supervised, Dataset, GaussianPrior, Likelihood, SupervisedModel};

/// `y = θᵀx + noise`, Gaussian noise, Gaussian prior.
#[derive(Debug, Clone)]
pub struct LinearGaussianRegression {
    noise_var: f64,
    prior: GaussianPrior,
}

impl LinearGaussianRegression {
    pub fn new(noise_var: f64, prior: GaussianPrior) -> Result<Self> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidHyper(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        Ok(Self { noise_var, prior })
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Closed-form posterior given the full dataset.
    pub fn conjugate_posterior(&self, data: &Dataset) -> Result<ConjugatePosterior> {
        let d = self.prior.dim();
        if !data.is_empty() {
            Error::check_dim(d, data.feature_dim())?;
        }
        let n = data.len();
        let x = DMatrix::from_fn(n, d, |i, j| data.inputs()[i][j]);
        let y = DVector::from_column_slice(data.targets());
        let prior_prec = DMatrix::from_diagonal(&DVector::from_vec(self.prior.precision()));
        let mu0 = DVector::from_column_slice(self.prior.mean());

        let precision = &prior_prec + x.transpose() * &x / self.noise_var;
        let chol = precision.clone().cholesky().ok_or_else(|| {
            Error::InvalidHyper("posterior precision not positive definite".into())
        })?;
        let cov = chol.inverse();
        let mean = &cov * (&prior_prec * &mu0 + x.transpose() * &y / self.noise_var);

        // y ~ N(X μ0, σ² I + X Σ0 Xᵀ)
        let log_evidence = if n == 0 {
            0.0
        } else {
            let prior_cov =
                DMatrix::from_diagonal(&DVector::from_column_slice(self.prior.variance()));
            let marginal_cov =
                DMatrix::identity(n, n) * self.noise_var + &x * prior_cov * x.transpose();
            let c = marginal_cov.cholesky().ok_or_else(|| {
                Error::InvalidHyper("marginal covariance not positive definite".into())
            })?;
            let resid = &y - &x * &mu0;
            let solved = c.solve(&resid);
            let log_det: f64 = 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            -0.5 * (resid.dot(&solved) + log_det + n as f64 * (2.0 * PI).ln())
        };

        Ok(ConjugatePosterior {
            mean: ParamVector::new(mean.iter().copied().collect())?,
            covariance: (0..d)
                .map(|i| (0..d).map(|j| cov[(i, j)]).collect())
                .collect(),
            log_evidence,
        })
    }
}

impl LogPosteriorFn for LinearGaussianRegression {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn record(&self, tape: &mut Tape, params: &[Var], batch: &Batch) -> Recorded {
        record_supervised(self, tape, params, batch)
    }
}

impl SupervisedModel for LinearGaussianRegression {
    fn output_dim(&self) -> usize {
        1
    }

    fn forward(&self, tape: &mut Tape, params: &[Var], x: &[f64]) -> Vec<Var> {
        let xs = tape.constants(x);
        vec![tape.dot(params, &xs)]
    }

    fn likelihood(&self) -> Likelihood {
        Likelihood::Gaussian {
            noise_var: self.noise_var,
        }
    }

    fn prior(&self) -> Option<&GaussianPrior> {
        Some(&self.prior)
    }
}

/// Exact Gaussian posterior of a conjugate linear model.
#[derive(Debug, Clone)]
pub struct ConjugatePosterior {
    pub mean: ParamVector,
    pub covariance: Vec<Vec<f64>>,
    /// `log p(y_{1:N})`.
    pub log_evidence: f64,
}

impl ConjugatePosterior {
    pub fn marginal_variances(&self) -> Vec<f64> {
        (0..self.covariance.len())
            .map(|i| self.covariance[i][i])
            .collect()
    }
}

/// Builds the model and its analytic posterior for the given data.
pub fn linear_gaussian_regression(
    data: &Dataset,
    noise_var: f64,
    prior: GaussianPrior,
) -> Result<(LinearGaussianRegression, ConjugatePosterior)> {
    let model = LinearGaussianRegression::new(noise_var, prior)?;
    let post = model.conjugate_posterior(data)?;
    Ok((model, post))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[f64]) -> ConjugatePosterior {
        let data = Dataset::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec()).unwrap();
        let prior = GaussianPrior::isotropic(1, 1.0).unwrap();
        linear_gaussian_regression(&data, 1.0, prior).unwrap().1
    }

    #[test]
    fn single_observation() {
        let post = one_d(&[1.0], &[1.0]);
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
        assert!((post.covariance[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_observations() {
        let post = one_d(&[1.0, 1.0], &[1.0, 1.0]);
        assert!((post.mean[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((post.covariance[0][0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_data_returns_prior() {
        let prior = GaussianPrior::new(vec![0.5, -1.0], vec![2.0, 0.25]).unwrap();
        let model = LinearGaussianRegression::new(1.0, prior).unwrap();
        let post = model.conjugate_posterior(&Dataset::empty()).unwrap();
        for (a, b) in post.mean.iter().zip([0.5, -1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in post.marginal_variances().iter().zip([2.0, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(post.log_evidence, 0.0);
    }

    #[test]
    fn evidence_matches_one_d_marginal() {
        // y ~ N(0, 1 + 1) for a single x = 1 under prior N(0,1), noise 1.
        let post = one_d(&[1.0], &[0.7]);
        let expected = -0.5 * (0.49 / 2.0 + (2.0 * PI * 2.0).ln());
        assert!((post.log_evidence - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_noise() {
        let prior = GaussianPrior::isotropic(1, 1.0).unwrap();
        assert!(LinearGaussianRegression::new(0.0, prior).is_err());
    }
}
