use std::sync::Arc;

use crate::base::{value_and_grad, Batch, LogPosteriorFn, ParamVector, RngStream, Transform};
use crate::error::{Error, Result};
use crate::models::BatchCursor;

use super::{
    sghmc_step, sgld_step, sgnht_step, Collection, LrSchedule, MomentumHyper, SampleTrace,
    SghmcState, SgldState, SgnhtState, Temperature,
};

/// Parameter norm beyond which a run is declared diverged.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SamplerKind {
    Sgld,
    Sghmc(MomentumHyper),
    Sgnht(MomentumHyper),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainState {
    Sgld(SgldState),
    Sghmc(SghmcState),
    Sgnht(SgnhtState),
}

impl ChainState {
    pub fn params(&self) -> &ParamVector {
        match self {
            ChainState::Sgld(s) => &s.params,
            ChainState::Sghmc(s) => &s.params,
            ChainState::Sgnht(s) => &s.params,
        }
    }

    pub fn momenta(&self) -> Option<&ParamVector> {
        match self {
            ChainState::Sgld(_) => None,
            ChainState::Sghmc(s) => Some(&s.momenta),
            ChainState::Sgnht(s) => Some(&s.momenta),
        }
    }

    pub fn step_count(&self) -> usize {
        match self {
            ChainState::Sgld(s) => s.step_count,
            ChainState::Sghmc(s) => s.step_count,
            ChainState::Sgnht(s) => s.step_count,
        }
    }

    pub fn last_log_post(&self) -> f64 {
        match self {
            ChainState::Sgld(s) => s.last_log_post,
            ChainState::Sghmc(s) => s.last_log_post,
            ChainState::Sgnht(s) => s.last_log_post,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerState {
    pub chain: ChainState,
    pub trace: SampleTrace,
}

/// An SGMCMC transform: gradient of the normalized log posterior, one step at
/// `ε_{step_count}`, then trace collection.
#[derive(Clone)]
pub struct Sampler {
    kind: SamplerKind,
    model: Arc<dyn LogPosteriorFn>,
    schedule: LrSchedule,
    temperature: Temperature,
    collection: Collection,
    guard: bool,
}

impl std::fmt::Debug for Sampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Sampler")
            .field("kind", &self.kind)
            .field("schedule", &self.schedule)
            .field("temperature", &self.temperature)
            .field("collection", &self.collection)
            .finish_non_exhaustive()
    }
}

pub fn build_sampler(
    kind: SamplerKind,
    model: Arc<dyn LogPosteriorFn>,
    schedule: LrSchedule,
    temperature: Temperature,
    collection: Collection,
) -> Result<Sampler> {
    schedule.validate(false)?;
    if let SamplerKind::Sghmc(h) | SamplerKind::Sgnht(h) = kind {
        MomentumHyper::new(h.inv_sigma_sq, h.alpha)?;
    }
    if matches!(kind, SamplerKind::Sgnht(_)) && temperature.value() == 0.0 {
        log::warn!("SGNHT at zero temperature diverges; it has no optimizer limit");
    }
    Ok(Sampler {
        kind,
        model,
        schedule,
        temperature,
        collection,
        guard: true,
    })
}

impl Sampler {
    /// Toggles the norm / log-posterior divergence check (on by default).
    pub fn with_divergence_guard(mut self, on: bool) -> Self {
        self.guard = on;
        self
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn model(&self) -> &Arc<dyn LogPosteriorFn> {
        &self.model
    }

    /// Runs `steps` updates drawing batches from `cursor`.
    pub fn run(
        &self,
        init: ParamVector,
        cursor: &mut BatchCursor,
        steps: usize,
        rng: &mut RngStream,
    ) -> Result<SamplerState> {
        let mut state = self.init(init);
        for _ in 0..steps {
            let batch = cursor.next_batch();
            state = self.update(state, &batch, rng)?;
        }
        Ok(state)
    }
}

impl Transform for Sampler {
    type State = SamplerState;

    fn init(&self, params: ParamVector) -> SamplerState {
        let chain = match self.kind {
            SamplerKind::Sgld => ChainState::Sgld(SgldState::new(params)),
            SamplerKind::Sghmc(_) => ChainState::Sghmc(SghmcState::new(params)),
            SamplerKind::Sgnht(h) => ChainState::Sgnht(SgnhtState::new(params, h.alpha)),
        };
        SamplerState {
            chain,
            trace: SampleTrace::new(self.collection),
        }
    }

    fn update(
        &self,
        state: SamplerState,
        batch: &Batch,
        rng: &mut RngStream,
    ) -> Result<SamplerState> {
        let SamplerState { chain, mut trace } = state;
        let step = chain.step_count();
        let eps = self.schedule.eval(step);
        let (lp, grad) = value_and_grad(self.model.as_ref(), chain.params(), batch)
            .map_err(|e| if self.guard { e.at_step(step) } else { e })?;
        let log_post = lp.value;
        let t = self.temperature;
        let chain = match (&chain, self.kind) {
            (ChainState::Sgld(s), _) => sgld_step(s, &grad, eps, t, rng).map(|mut n| {
                n.last_log_post = log_post;
                ChainState::Sgld(n)
            }),
            (ChainState::Sghmc(s), SamplerKind::Sghmc(h)) => sghmc_step(s, &grad, eps, h, t, rng)
                .map(|mut n| {
                    n.last_log_post = log_post;
                    ChainState::Sghmc(n)
                }),
            (ChainState::Sgnht(s), SamplerKind::Sgnht(h)) => sgnht_step(s, &grad, eps, h, t, rng)
                .map(|mut n| {
                    n.last_log_post = log_post;
                    ChainState::Sgnht(n)
                }),
            _ => Err(Error::InvalidHyper(
                "state does not match sampler kind".into(),
            )),
        }
        .map_err(|e| e.at_step(step))?;
        if self.guard && chain.params().norm() > DIVERGENCE_NORM {
            return Err(Error::Diverged {
                step,
                reason: format!("parameter norm exceeded {DIVERGENCE_NORM:e}"),
            });
        }
        trace.record(chain.params(), log_post, eps);
        Ok(SamplerState { chain, trace })
    }
}
