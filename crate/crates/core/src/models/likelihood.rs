use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::base::{Batch, LogPosteriorFn, Recorded};

use super::GaussianPrior;

/// Observation model on top of a forward function's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Likelihood {
    /// `y ~ N(f(x), noise_var)` on a single output.
    Gaussian { noise_var: f64 },
    /// `y ~ Categorical(softmax(f(x)))`; targets are class indices.
    Categorical { classes: usize },
}

impl Likelihood {
    pub fn record(&self, tape: &mut Tape, outputs: &[Var], y: f64) -> Var {
        match *self {
            Likelihood::Gaussian { noise_var } => {
                let r = tape.add_const(outputs[0], -y);
                let sq = tape.square(r);
                let s = tape.scale(sq, -0.5 / noise_var);
                tape.add_const(s, -0.5 * (2.0 * PI * noise_var).ln())
            }
            Likelihood::Categorical { .. } => {
                let lse = tape.logsumexp(outputs);
                tape.sub(outputs[y as usize], lse)
            }
        }
    }

    pub fn log_prob(&self, outputs: &[f64], y: f64) -> f64 {
        match *self {
            Likelihood::Gaussian { noise_var } => {
                -0.5 * (y - outputs[0]).powi(2) / noise_var - 0.5 * (2.0 * PI * noise_var).ln()
            }
            Likelihood::Categorical { .. } => outputs[y as usize] - logsumexp(outputs),
        }
    }
}

pub fn logsumexp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// A model made of a differentiable forward map, a likelihood on its outputs
/// and an optional Gaussian prior (`None` means a flat prior).
pub trait SupervisedModel: LogPosteriorFn {
    fn output_dim(&self) -> usize;

    fn forward(&self, tape: &mut Tape, params: &[Var], x: &[f64]) -> Vec<Var>;

    fn likelihood(&self) -> Likelihood;

    fn prior(&self) -> Option<&GaussianPrior>;

    fn log_likelihood(&self, tape: &mut Tape, params: &[Var], x: &[f64], y: f64) -> Var {
        let out = self.forward(tape, params, x);
        self.likelihood().record(tape, &out, y)
    }

    /// Forward outputs at concrete parameters.
    fn predict(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        let mut tape = Tape::new();
        let p = tape.constants(params);
        let out = self.forward(&mut tape, &p, x);
        tape.values(&out)
    }
}

/// Shared body of [`LogPosteriorFn::record`] for supervised models.
pub fn record_supervised<M: SupervisedModel + ?Sized>(
    model: &M,
    tape: &mut Tape,
    params: &[Var],
    batch: &Batch,
) -> Recorded {
    let lik = model.likelihood();
    let mut lls = Vec::with_capacity(batch.len());
    let mut aux = Vec::with_capacity(batch.len());
    for (x, y) in batch.iter() {
        let out = model.forward(tape, params, x);
        lls.push(lik.record(tape, &out, y));
        aux.push(out);
    }
    let n_total = batch.total_size().max(1) as f64;
    let mut terms = Vec::with_capacity(2);
    if !lls.is_empty() {
        let s = tape.sum(&lls);
        terms.push(tape.scale(s, 1.0 / lls.len() as f64));
    }
    if let Some(prior) = model.prior() {
        let lp = prior.record(tape, params);
        terms.push(tape.scale(lp, 1.0 / n_total));
    }
    let value = match terms.len() {
        0 => tape.constant(0.0),
        1 => terms[0],
        _ => tape.add(terms[0], terms[1]),
    };
    Recorded { value, aux }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confident_softmax_log_lik() {
        let lik = Likelihood::Categorical { classes: 2 };
        let mut t = Tape::new();
        let z = t.constants(&[10.0, -10.0]);
        let ll = lik.record(&mut t, &z, 0.0);
        let expected = -(1.0 + (-20.0f64).exp()).ln();
        assert!((t.value(ll) - expected).abs() < 1e-14);
        assert!((expected + 2.06e-9).abs() < 1e-11);
        assert!((lik.log_prob(&[10.0, -10.0], 0.0) - expected).abs() < 1e-14);
    }
}
