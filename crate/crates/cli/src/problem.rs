//! Turns model and data specs into concrete models, datasets and cursors.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use tempered::base::{LogPosteriorFn, ParamVector, RngStream};
use tempered::models::{
    double_well_target, gaussian_target, mlp_classifier, two_moons, BatchCursor, Dataset,
    GaussianPrior, LinearGaussianRegression, Mlp, SupervisedModel, SyntheticTarget,
};

use crate::config::{DataSpec, ModelSpec};

#[derive(Clone)]
enum Model {
    Mlp(Arc<Mlp>),
    Linear(Arc<LinearGaussianRegression>),
    Target(Arc<SyntheticTarget>),
}

/// A model together with its train and test data.
#[derive(Clone)]
pub struct Problem {
    model: Model,
    pub train: Arc<Dataset>,
    pub test: Dataset,
}

impl Problem {
    pub fn build(model: &ModelSpec, data: &DataSpec) -> Result<Self> {
        if let ModelSpec::DoubleWell { a, c } = *model {
            let t = double_well_target(a, c)?;
            return Ok(Self::target(t));
        }
        if let ModelSpec::Gaussian { mean, variance } = model {
            let t = gaussian_target(mean.clone(), variance.clone())?;
            return Ok(Self::target(t));
        }
        let (train, test) = load_data(data)?;
        if train.is_empty() {
            bail!("training set is empty");
        }
        let p = train.feature_dim();
        let model = match model {
            ModelSpec::Mlp {
                hidden,
                activation,
                prior_var,
            } => {
                let classes = train
                    .targets()
                    .iter()
                    .map(|&y| y as usize + 1)
                    .max()
                    .unwrap_or(2)
                    .max(2);
                if let Some(y) = train
                    .targets()
                    .iter()
                    .find(|y| y.fract() != 0.0 || **y < 0.0)
                {
                    bail!("classifier targets must be class indices, found {y}");
                }
                let mut sizes = vec![p];
                sizes.extend(hidden);
                sizes.push(classes);
                let bare = mlp_classifier(sizes, *activation, None)?;
                let prior = GaussianPrior::isotropic(bare.dim(), *prior_var)?;
                Model::Mlp(Arc::new(bare.with_prior(Some(prior))?))
            }
            ModelSpec::Linear {
                noise_var,
                prior_var,
            } => {
                let prior = GaussianPrior::isotropic(p, *prior_var)?;
                Model::Linear(Arc::new(LinearGaussianRegression::new(*noise_var, prior)?))
            }
            ModelSpec::DoubleWell { .. } | ModelSpec::Gaussian { .. } => unreachable!(),
        };
        Ok(Self {
            model,
            train: Arc::new(train),
            test,
        })
    }

    fn target(t: SyntheticTarget) -> Self {
        Self {
            model: Model::Target(Arc::new(t)),
            train: Arc::new(Dataset::empty()),
            test: Dataset::empty(),
        }
    }

    /// Number of training points; densities without data count as one.
    pub fn n(&self) -> usize {
        self.train.len().max(1)
    }

    pub fn dim(&self) -> usize {
        self.posterior().dim()
    }

    pub fn posterior(&self) -> Arc<dyn LogPosteriorFn> {
        match &self.model {
            Model::Mlp(m) => m.clone(),
            Model::Linear(m) => m.clone(),
            Model::Target(m) => m.clone(),
        }
    }

    pub fn supervised(&self) -> Option<Arc<dyn SupervisedModel>> {
        match &self.model {
            Model::Mlp(m) => Some(m.clone()),
            Model::Linear(m) => Some(m.clone()),
            Model::Target(_) => None,
        }
    }

    pub fn target_density(&self) -> Option<&SyntheticTarget> {
        match &self.model {
            Model::Target(t) => Some(t),
            _ => None,
        }
    }

    pub fn prior(&self) -> Option<GaussianPrior> {
        match &self.model {
            Model::Mlp(m) => m.prior().cloned(),
            Model::Linear(m) => m.prior().cloned(),
            Model::Target(_) => None,
        }
    }

    /// The same problem under a flat prior. Only classifiers support this.
    pub fn without_prior(&self) -> Result<Self> {
        match &self.model {
            Model::Mlp(m) => Ok(Self {
                model: Model::Mlp(Arc::new(m.with_prior(None)?)),
                ..self.clone()
            }),
            _ => bail!("a flat-prior fit needs an mlp model"),
        }
    }

    pub fn cursor(&self, batch_size: usize, shuffle_seed: u64) -> Result<BatchCursor> {
        match &self.model {
            Model::Target(_) => Ok(BatchCursor::target(1)),
            _ => Ok(BatchCursor::new(
                self.train.clone(),
                batch_size,
                shuffle_seed,
            )?),
        }
    }

    /// Starting point: fan-in scaled weights for networks, prior draws for
    /// linear models and standard normal draws for densities.
    pub fn init(&self, rng: &mut RngStream) -> ParamVector {
        match &self.model {
            Model::Mlp(m) => m.init_params(rng),
            Model::Linear(m) => m.prior().expect("linear models carry a prior").sample(rng),
            Model::Target(t) => rng.gaussian_noise(t.dim()),
        }
    }
}

fn load_data(spec: &DataSpec) -> Result<(Dataset, Dataset)> {
    match spec {
        DataSpec::TwoMoons {
            n_train,
            n_test,
            noise,
            label_flip,
            seed,
        } => {
            let all = two_moons(n_train + n_test, *noise, *label_flip, *seed);
            let train: Vec<usize> = (0..*n_train).collect();
            let test: Vec<usize> = (*n_train..n_train + n_test).collect();
            // test labels are never flipped
            let clean = two_moons(n_train + n_test, *noise, 0.0, *seed);
            Ok((pick(&all, &train)?, pick(&clean, &test)?))
        }
        DataSpec::Linear {
            n_train,
            n_test,
            weights,
            noise_var,
            seed,
        } => {
            let mut rng = RngStream::new(*seed, 0);
            let mut make = |n: usize| {
                let mut xs = Vec::with_capacity(n);
                let mut ys = Vec::with_capacity(n);
                for _ in 0..n {
                    let x: Vec<f64> = (0..weights.len()).map(|_| rng.standard_normal()).collect();
                    let f: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum();
                    ys.push(f + noise_var.sqrt() * rng.standard_normal());
                    xs.push(x);
                }
                Dataset::new(xs, ys)
            };
            let train = make(*n_train)?;
            let test = make(*n_test)?;
            Ok((train, test))
        }
        DataSpec::Csv { train, test } => {
            let tr =
                Dataset::read_csv(train).with_context(|| format!("reading {}", train.display()))?;
            let te = match test {
                Some(p) => {
                    Dataset::read_csv(p).with_context(|| format!("reading {}", p.display()))?
                }
                None => Dataset::empty(),
            };
            Ok((tr, te))
        }
    }
}

fn pick(ds: &Dataset, idx: &[usize]) -> Result<Dataset> {
    Ok(Dataset::new(
        idx.iter().map(|&i| ds.inputs()[i].clone()).collect(),
        idx.iter().map(|&i| ds.targets()[i]).collect(),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moons_split_is_disjoint_and_sized() {
        let spec = DataSpec::TwoMoons {
            n_train: 10,
            n_test: 6,
            noise: 0.1,
            label_flip: 0.3,
            seed: 4,
        };
        let p = Problem::build(&ModelSpec::default(), &spec).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (10, 6));
        assert_eq!(p.dim(), 2 * 16 + 16 + 16 * 2 + 2);
        assert!(p.prior().is_some());
        assert!(p.without_prior().unwrap().prior().is_none());
    }

    #[test]
    fn densities_have_no_data() {
        let p = Problem::build(
            &ModelSpec::DoubleWell { a: 1.0, c: 2.0 },
            &DataSpec::default(),
        )
        .unwrap();
        assert_eq!(p.n(), 1);
        assert!(p.supervised().is_none());
        assert_eq!(p.cursor(8, 0).unwrap().total_size(), 1);
    }
}
