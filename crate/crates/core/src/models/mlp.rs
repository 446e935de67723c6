use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::base::{Batch, LogPosteriorFn, ParamVector, Recorded, RngStream};
use crate::error::{Error, Result};

use super::{record_supervised, GaussianPrior, Likelihood, SupervisedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

/// Fully connected network. Parameters are laid out layer by layer, each
/// layer as a row-major `out x in` weight block followed by `out` biases.
#[derive(Debug, Clone)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    likelihood: Likelihood,
    prior: Option<GaussianPrior>,
}

impl Mlp {
    pub fn new(
        sizes: Vec<usize>,
        activation: Activation,
        likelihood: Likelihood,
        prior: Option<GaussianPrior>,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidHyper(format!("bad layer sizes {sizes:?}")));
        }
        let out = *sizes.last().unwrap();
        match likelihood {
            Likelihood::Categorical { classes } if classes != out || classes < 2 => {
                return Err(Error::InvalidHyper(format!(
                    "final width {out} must equal class count {classes} (>= 2)"
                )))
            }
            Likelihood::Gaussian { noise_var } if out != 1 || !(noise_var > 0.0) => {
                return Err(Error::InvalidHyper(
                    "regression head needs one output and positive noise".into(),
                ))
            }
            _ => {}
        }
        let dim = Self::count(&sizes);
        if let Some(p) = &prior {
            Error::check_dim(dim, p.dim())?;
        }
        Ok(Self {
            sizes,
            activation,
            likelihood,
            prior,
        })
    }

    fn count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Same architecture with a different prior.
    pub fn with_prior(&self, prior: Option<GaussianPrior>) -> Result<Self> {
        Self::new(self.sizes.clone(), self.activation, self.likelihood, prior)
    }

    /// `N(0, 1/fan_in)` weights, zero biases.
    pub fn init_params(&self, rng: &mut RngStream) -> ParamVector {
        let mut v = Vec::with_capacity(LogPosteriorFn::dim(self));
        for w in self.sizes.windows(2) {
            let scale = (1.0 / w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] {
                v.push(scale * rng.standard_normal());
            }
            v.extend(std::iter::repeat_n(0.0, w[1]));
        }
        ParamVector::new(v).expect("finite init")
    }
}

/// Categorical MLP with `layer_sizes[last]` classes.
pub fn mlp_classifier(
    layer_sizes: Vec<usize>,
    activation: Activation,
    prior: Option<GaussianPrior>,
) -> Result<Mlp> {
    let classes = *layer_sizes.last().unwrap_or(&0);
    Mlp::new(
        layer_sizes,
        activation,
        Likelihood::Categorical { classes },
        prior,
    )
}

impl LogPosteriorFn for Mlp {
    fn dim(&self) -> usize {
        Self::count(&self.sizes)
    }

    fn record(&self, tape: &mut Tape, params: &[Var], batch: &Batch) -> Recorded {
        record_supervised(self, tape, params, batch)
    }
}

impl SupervisedModel for Mlp {
    fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn forward(&self, tape: &mut Tape, params: &[Var], x: &[f64]) -> Vec<Var> {
        let mut h = tape.constants(x);
        let mut offset = 0;
        let layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            offset += fan_in * fan_out;
            let bias = &params[offset..offset + fan_out];
            offset += fan_out;
            let z = tape.matvec(weights, fan_out, fan_in, &h);
            h = z
                .into_iter()
                .zip(bias)
                .map(|(zi, &b)| {
                    let pre = tape.add(zi, b);
                    if l + 1 == layers {
                        pre
                    } else {
                        match self.activation {
                            Activation::Tanh => tape.tanh(pre),
                            Activation::Relu => tape.relu(pre),
                        }
                    }
                })
                .collect();
        }
        h
    }

    fn likelihood(&self) -> Likelihood {
        self.likelihood
    }

    fn prior(&self) -> Option<&GaussianPrior> {
        self.prior.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::normalized_log_posterior;

    #[test]
    fn zero_weights_give_uniform_softmax() {
        let m = mlp_classifier(vec![2, 4, 3], Activation::Tanh, None).unwrap();
        let theta = ParamVector::zeros(LogPosteriorFn::dim(&m));
        assert_eq!(m.predict(&theta, &[0.3, -2.0]), vec![0.0, 0.0, 0.0]);
        let batch = Batch::new(vec![vec![0.3, -2.0]], vec![1.0], 1).unwrap();
        let lp = normalized_log_posterior(&m, &theta, &batch).unwrap();
        assert!((lp.value + 3f64.ln()).abs() < 1e-15);
        assert_eq!(lp.aux, vec![vec![0.0, 0.0, 0.0]]);
    }

    #[test]
    fn layout_size() {
        let m = mlp_classifier(vec![2, 16, 2], Activation::Relu, None).unwrap();
        assert_eq!(LogPosteriorFn::dim(&m), 2 * 16 + 16 + 16 * 2 + 2);
    }

    #[test]
    fn rejects_mismatched_head() {
        assert!(Mlp::new(
            vec![2, 3],
            Activation::Tanh,
            Likelihood::Categorical { classes: 2 },
            None
        )
        .is_err());
        assert!(mlp_classifier(vec![2, 1], Activation::Tanh, None).is_err());
        let prior = GaussianPrior::isotropic(3, 1.0).unwrap();
        assert!(mlp_classifier(vec![2, 2], Activation::Tanh, Some(prior)).is_err());
    }

    #[test]
    fn wrong_param_count_is_reported() {
        let m = mlp_classifier(vec![2, 2], Activation::Tanh, None).unwrap();
        let batch = Batch::new(vec![vec![0.0, 0.0]], vec![0.0], 1).unwrap();
        let err = normalized_log_posterior(&m, &ParamVector::zeros(3), &batch).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 6,
                got: 3
            }
        ));
    }
}
