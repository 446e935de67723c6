//! Posterior predictives: Monte Carlo over parameter draws, linearized
//! forward distributions and the total / aleatoric / epistemic split.
//!
//! Entropies are in nats. The outer expectation is the uniform plug-in
//! average over the available members, which is biased for small ensembles.

use std::io::Write;

use crate::autodiff::{JacobianOperator, Tape, Var};
use crate::base::{ParamVector, RngStream};
use crate::error::{Error, Result};
use crate::gaussian_approx::DiagGaussian;
use crate::io::fmt17;
use crate::models::{softmax, Dataset, Likelihood, SupervisedModel};

/// Probabilities below this are clamped inside `p ln p`.
pub const PROB_FLOOR: f64 = 1e-300;

const SUM_TOL: f64 = 1e-12;

/// Uniformly weighted member predictives at one input.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveEnsemble {
    Categorical {
        members: Vec<Vec<f64>>,
    },
    Gaussian {
        means: Vec<Vec<f64>>,
        variances: Vec<Vec<f64>>,
    },
}

impl PredictiveEnsemble {
    pub fn categorical(members: Vec<Vec<f64>>) -> Result<Self> {
        let k = members
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Data("empty ensemble".into()))?;
        for m in &members {
            Error::check_dim(k, m.len())?;
            if m.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::Data(
                    "member probabilities must be finite and non-negative".into(),
                ));
            }
            let s: f64 = m.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::Data(format!("member probabilities sum to {s}")));
            }
        }
        Ok(PredictiveEnsemble::Categorical { members })
    }

    pub fn gaussian(means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        Error::check_dim(means.len(), variances.len())?;
        let k = means
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Data("empty ensemble".into()))?;
        for (m, v) in means.iter().zip(&variances) {
            Error::check_dim(k, m.len())?;
            Error::check_dim(k, v.len())?;
            if v.iter().any(|s| !(*s >= 0.0)) {
                return Err(Error::Data("member variances must be non-negative".into()));
            }
        }
        Ok(PredictiveEnsemble::Gaussian { means, variances })
    }

    pub fn len(&self) -> usize {
        match self {
            PredictiveEnsemble::Categorical { members } => members.len(),
            PredictiveEnsemble::Gaussian { means, .. } => means.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mixture probabilities (categorical) or the mean of member means.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            PredictiveEnsemble::Categorical { members } => average(members),
            PredictiveEnsemble::Gaussian { means, .. } => average(means),
        }
    }

    /// Argmax of the mixture; ties go to the lowest class index.
    pub fn predicted_class(&self) -> usize {
        argmax(&self.mean())
    }

    /// Log predictive density of `y` under the uniform mixture.
    pub fn log_prob(&self, y: f64) -> f64 {
        match self {
            PredictiveEnsemble::Categorical { .. } => self.mean()[y as usize].max(PROB_FLOOR).ln(),
            PredictiveEnsemble::Gaussian { means, variances } => {
                let logs: Vec<f64> = means
                    .iter()
                    .zip(variances)
                    .map(|(m, v)| Likelihood::Gaussian { noise_var: v[0] }.log_prob(m, y))
                    .collect();
                crate::models::logsumexp(&logs) - (logs.len() as f64).ln()
            }
        }
    }
}

fn average(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut acc = vec![0.0; rows.first().map_or(0, Vec::len)];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Entropy in nats; probabilities are clamped at [`PROB_FLOOR`] inside the log.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&q| q * q.max(PROB_FLOOR).ln()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveUncertainty {
    pub tu: f64,
    pub au: f64,
    pub eu: f64,
}

/// `TU = H[mixture]`, `AU = mean member entropy`, `EU = TU - AU`.
///
/// Round-off can push `EU` a hair below zero; it is floored at 0.
pub fn decompose_uncertainty(members: &[Vec<f64>]) -> PredictiveUncertainty {
    let tu = entropy(&average(members));
    let au = members.iter().map(|m| entropy(m)).sum::<f64>() / members.len() as f64;
    PredictiveUncertainty {
        tu,
        au,
        eu: (tu - au).max(0.0),
    }
}

/// Law-of-total-variance split per output for Gaussian members.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceDecomposition {
    pub total: Vec<f64>,
    pub aleatoric: Vec<f64>,
    pub epistemic: Vec<f64>,
}

pub fn decompose_variance(means: &[Vec<f64>], variances: &[Vec<f64>]) -> VarianceDecomposition {
    let aleatoric = average(variances);
    let mu = average(means);
    let n = means.len() as f64;
    let epistemic: Vec<f64> = (0..mu.len())
        .map(|j| means.iter().map(|m| (m[j] - mu[j]).powi(2)).sum::<f64>() / n)
        .collect();
    let total = aleatoric
        .iter()
        .zip(&epistemic)
        .map(|(a, e)| a + e)
        .collect();
    VarianceDecomposition {
        total,
        aleatoric,
        epistemic,
    }
}

impl PredictiveEnsemble {
    /// Entropy split for categorical ensembles; for Gaussian ensembles the
    /// variance split summed over outputs.
    pub fn uncertainty(&self) -> PredictiveUncertainty {
        match self {
            PredictiveEnsemble::Categorical { members } => decompose_uncertainty(members),
            PredictiveEnsemble::Gaussian { means, variances } => {
                let d = decompose_variance(means, variances);
                PredictiveUncertainty {
                    tu: d.total.iter().sum(),
                    au: d.aleatoric.iter().sum(),
                    eu: d.epistemic.iter().sum(),
                }
            }
        }
    }
}

/// One predictive member per parameter draw.
pub fn predictive_from_params<M: SupervisedModel + ?Sized>(
    model: &M,
    params: &[ParamVector],
    x: &[f64],
) -> Result<PredictiveEnsemble> {
    if params.is_empty() {
        return Err(Error::Data("no parameter draws".into()));
    }
    let mut outs = Vec::with_capacity(params.len());
    for p in params {
        Error::check_dim(model.dim(), p.dim())?;
        outs.push(model.predict(p, x));
    }
    match model.likelihood() {
        Likelihood::Categorical { .. } => {
            PredictiveEnsemble::categorical(outs.iter().map(|o| softmax(o)).collect())
        }
        Likelihood::Gaussian { noise_var } => {
            let vars = outs.iter().map(|o| vec![noise_var; o.len()]).collect();
            PredictiveEnsemble::gaussian(outs, vars)
        }
    }
}

/// `N(f(x) | f_μ(x), diag(J Σ Jᵀ))` for a diagonal parameter Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedGaussianPredictive {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Linearized predictive of an arbitrary forward map recorded at `g.mean`.
/// Each output's Jacobian row is obtained by one vjp probe.
pub fn linearized_predictive_fn<F>(
    g: &DiagGaussian,
    forward: F,
) -> Result<LinearizedGaussianPredictive>
where
    F: FnOnce(&mut Tape, &[Var]) -> Vec<Var>,
{
    Error::check_dim(g.mean.dim(), g.diag_variance.len())?;
    let op = JacobianOperator::new(forward, &g.mean)?;
    let variance = (0..op.output_dim())
        .map(|j| {
            op.row(j)
                .iter()
                .zip(&g.diag_variance)
                .map(|(r, v)| r * r * v)
                .sum()
        })
        .collect();
    Ok(LinearizedGaussianPredictive {
        mean: op.value(),
        variance,
    })
}

pub fn linearized_predictive<M: SupervisedModel + ?Sized>(
    g: &DiagGaussian,
    model: &M,
    x: &[f64],
) -> Result<LinearizedGaussianPredictive> {
    Error::check_dim(model.dim(), g.dim())?;
    linearized_predictive_fn(g, |t, p| model.forward(t, p, x))
}

/// Softmax of `n` logit vectors drawn from the linearized Gaussian.
pub fn logit_samples_to_categorical(
    lin: &LinearizedGaussianPredictive,
    n: usize,
    rng: &mut RngStream,
) -> Result<PredictiveEnsemble> {
    if n == 0 {
        return Err(Error::InvalidHyper("need at least one logit sample".into()));
    }
    let std: Vec<f64> = lin.variance.iter().map(|v| v.max(0.0).sqrt()).collect();
    let members = (0..n)
        .map(|_| {
            let z: Vec<f64> = lin
                .mean
                .iter()
                .zip(&std)
                .map(|(m, s)| m + s * rng.standard_normal())
                .collect();
            softmax(&z)
        })
        .collect();
    PredictiveEnsemble::categorical(members)
}

/// Mean test negative log-likelihood and argmax accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// Scores one predictive per test input against `data`'s targets.
pub fn score(predictives: &[PredictiveEnsemble], data: &Dataset) -> Result<TestMetrics> {
    Error::check_dim(data.len(), predictives.len())?;
    if data.is_empty() {
        return Err(Error::Data("empty test set".into()));
    }
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut hits = 0usize;
    for (p, &y) in predictives.iter().zip(data.targets()) {
        loss -= p.log_prob(y);
        if matches!(p, PredictiveEnsemble::Categorical { .. }) && p.predicted_class() == y as usize
        {
            hits += 1;
        }
    }
    Ok(TestMetrics {
        loss: loss / n,
        accuracy: hits as f64 / n,
    })
}

/// Parameter-sample predictive metrics over a whole test set.
pub fn evaluate_params<M: SupervisedModel + ?Sized>(
    model: &M,
    params: &[ParamVector],
    data: &Dataset,
) -> Result<(Vec<PredictiveEnsemble>, TestMetrics)> {
    let preds = data
        .inputs()
        .iter()
        .map(|x| predictive_from_params(model, params, x))
        .collect::<Result<Vec<_>>>()?;
    let m = score(&preds, data)?;
    Ok((preds, m))
}

/// CSV `input_id,TU,AU,EU,predicted_class`.
pub fn write_uncertainty_csv<W: Write>(predictives: &[PredictiveEnsemble], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["input_id", "TU", "AU", "EU", "predicted_class"])?;
    for (i, p) in predictives.iter().enumerate() {
        let u = p.uncertainty();
        w.write_record([
            i.to_string(),
            fmt17(u.tu),
            fmt17(u.au),
            fmt17(u.eu),
            p.predicted_class().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
