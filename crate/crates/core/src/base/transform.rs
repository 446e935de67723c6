use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

use super::{Batch, ParamVector, RngStream};

/// Nodes produced by recording a log posterior.
#[derive(Debug, Clone)]
pub struct Recorded {
    /// Batch-normalized log posterior:
    /// `(1/|b|) Σ_b log p(y_i | θ) + (1/N) log p(θ)`.
    pub value: Var,
    /// Per-datum model outputs, passed through untouched.
    pub aux: Vec<Vec<Var>>,
}

/// A model's log posterior in the batch-normalized convention.
///
/// Its expectation over uniformly drawn batches is `N⁻¹ log π(θ)` up to a
/// constant, so its gradient estimates `N⁻¹ ∇ log π(θ)`.
pub trait LogPosteriorFn: Send + Sync {
    fn dim(&self) -> usize;

    fn record(&self, tape: &mut Tape, params: &[Var], batch: &Batch) -> Recorded;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogPosteriorResult {
    pub value: f64,
    pub aux: Vec<Vec<f64>>,
}

fn record_checked(
    model: &dyn LogPosteriorFn,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(Tape, Recorded)> {
    Error::check_dim(model.dim(), params.dim())?;
    let mut tape = Tape::new();
    let vars = tape.inputs(params);
    let rec = model.record(&mut tape, &vars, batch);
    Ok((tape, rec))
}

fn result_of(tape: &Tape, rec: &Recorded) -> LogPosteriorResult {
    LogPosteriorResult {
        value: tape.value(rec.value),
        aux: rec.aux.iter().map(|a| tape.values(a)).collect(),
    }
}

pub fn normalized_log_posterior(
    model: &dyn LogPosteriorFn,
    params: &ParamVector,
    batch: &Batch,
) -> Result<LogPosteriorResult> {
    let (tape, rec) = record_checked(model, params, batch)?;
    let res = result_of(&tape, &rec);
    if !res.value.is_finite() {
        let g = tape.gradient(rec.value);
        return Err(Error::NonFinite {
            what: "log posterior",
            index: g.iter().position(|v| !v.is_finite()),
        });
    }
    Ok(res)
}

/// Normalized log posterior together with its gradient.
pub fn value_and_grad(
    model: &dyn LogPosteriorFn,
    params: &ParamVector,
    batch: &Batch,
) -> Result<(LogPosteriorResult, ParamVector)> {
    let (tape, rec) = record_checked(model, params, batch)?;
    let res = result_of(&tape, &rec);
    let g = tape.gradient(rec.value);
    let bad = g.iter().position(|v| !v.is_finite());
    if !res.value.is_finite() {
        return Err(Error::NonFinite {
            what: "log posterior",
            index: bad,
        });
    }
    if bad.is_some() {
        return Err(Error::NonFinite {
            what: "gradient",
            index: bad,
        });
    }
    Ok((res, ParamVector::new(g)?))
}

/// A pure state transform: `init` builds a state without randomness and
/// `update` consumes a state and returns the next one.
pub trait Transform {
    type State;

    fn init(&self, params: ParamVector) -> Self::State;

    fn update(&self, state: Self::State, batch: &Batch, rng: &mut RngStream)
        -> Result<Self::State>;
}
