//! Independent parallel chains: Bayesian deep ensembles at `𝒯 > 0`, classical
//! deep ensembles at `𝒯 = 0` with last-sample retention.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::base::{LogPosteriorFn, ParamVector, RngStream};
use crate::error::{Error, Result};
use crate::io::{fmt17, json_floats};
use crate::models::{BatchCursor, GaussianPrior};
use crate::sgmcmc::{build_sampler, Collection, LrSchedule, SamplerKind, Temperature};

const INIT_TAG: u64 = 1;
const SHUFFLE_TAG: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitStrategy {
    /// Every chain starts at the same point.
    Shared { point: ParamVector },
    /// Independent prior draws.
    Prior { prior: GaussianPrior },
    /// Independent `N(center, std²)` draws per coordinate.
    Jitter { center: ParamVector, std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Retain {
    LastOnly,
    /// Thinned trace per chain; `burn_in` defaults to half the steps.
    Thinned {
        burn_in: Option<usize>,
        thin: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shuffle {
    /// All chains see the minibatch order of the template cursor.
    Shared,
    /// Each chain reshuffles with a seed drawn from its own stream.
    #[default]
    PerChain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_chains: usize,
    pub base_seed: u64,
    pub sampler: SamplerKind,
    pub schedule: LrSchedule,
    pub temperature: Temperature,
    pub steps: usize,
    pub init: InitStrategy,
    pub retain: Retain,
    #[serde(default)]
    pub shuffle: Shuffle,
}

impl EnsembleConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_chains < 1 {
            return Err(Error::InvalidHyper(
                "an ensemble needs at least one chain".into(),
            ));
        }
        match &self.init {
            InitStrategy::Shared { point } => Error::check_dim(dim, point.dim())?,
            InitStrategy::Prior { prior } => Error::check_dim(dim, prior.dim())?,
            InitStrategy::Jitter { center, std } => {
                Error::check_dim(dim, center.dim())?;
                if !(*std >= 0.0 && std.is_finite()) {
                    return Err(Error::InvalidHyper(format!(
                        "jitter std must be non-negative, got {std}"
                    )));
                }
            }
        }
        if let Retain::Thinned { thin: 0, .. } = self.retain {
            return Err(Error::InvalidHyper(
                "thinning interval must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn collection(&self) -> Collection {
        match self.retain {
            Retain::LastOnly => Collection::new(self.steps.saturating_sub(1), 1),
            Retain::Thinned { burn_in, thin } => {
                Collection::new(burn_in.unwrap_or(self.steps / 2), thin)
            }
        }
    }

    /// Hex SHA-256 of the JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Stream of chain `i`: `(base_seed, i)`.
pub fn chain_stream(base_seed: u64, chain: usize) -> RngStream {
    RngStream::new(base_seed, chain as u64)
}

fn initial_point(init: &InitStrategy, rng: &RngStream) -> ParamVector {
    let mut r = rng.child(INIT_TAG);
    match init {
        InitStrategy::Shared { point } => point.clone(),
        InitStrategy::Prior { prior } => prior.sample(&mut r),
        InitStrategy::Jitter { center, std } => ParamVector::new(
            center
                .iter()
                .map(|c| c + std * r.standard_normal())
                .collect(),
        )
        .expect("finite draw"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub init: ParamVector,
    pub final_log_post: f64,
    /// Reason the chain was dropped, if it diverged.
    pub diverged: Option<String>,
    pub n_members: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Retained samples ordered by chain id, then by step.
    pub members: Vec<ParamVector>,
    /// Chain id of each member.
    pub member_chain: Vec<usize>,
    pub chains: Vec<ChainDiagnostics>,
}

impl EnsembleResult {
    pub fn n_diverged(&self) -> usize {
        self.chains.iter().filter(|c| c.diverged.is_some()).count()
    }
}

fn run_chain(
    cfg: &EnsembleConfig,
    model: &Arc<dyn LogPosteriorFn>,
    cursor: &BatchCursor,
    chain: usize,
) -> Result<(ChainDiagnostics, Vec<ParamVector>)> {
    let mut rng = chain_stream(cfg.base_seed, chain);
    let init = initial_point(&cfg.init, &rng);
    let mut cursor = match cfg.shuffle {
        Shuffle::Shared => cursor.clone(),
        Shuffle::PerChain => cursor.reseeded(rng.child(SHUFFLE_TAG).next_u64()),
    };
    let sampler = build_sampler(
        cfg.sampler,
        Arc::clone(model),
        cfg.schedule,
        cfg.temperature,
        cfg.collection(),
    )?;
    Ok(
        match sampler.run(init.clone(), &mut cursor, cfg.steps, &mut rng) {
            Ok(state) => {
                let samples = state.trace.samples;
                (
                    ChainDiagnostics {
                        chain,
                        init,
                        final_log_post: state.chain.last_log_post(),
                        diverged: None,
                        n_members: samples.len(),
                    },
                    samples,
                )
            }
            Err(e @ (Error::Diverged { .. } | Error::NonFinite { .. })) => (
                ChainDiagnostics {
                    chain,
                    init,
                    final_log_post: f64::NAN,
                    diverged: Some(e.to_string()),
                    n_members: 0,
                },
                Vec::new(),
            ),
            Err(e) => return Err(e),
        },
    )
}

/// Runs all chains concurrently. Results are aggregated in chain order, so
/// they do not depend on scheduling. Diverged chains are dropped with a
/// warning; if none survive the run fails.
pub fn run_parallel(
    cfg: &EnsembleConfig,
    model: Arc<dyn LogPosteriorFn>,
    cursor: &BatchCursor,
) -> Result<EnsembleResult> {
    cfg.validate(model.dim())?;
    let runs = (0..cfg.n_chains)
        .into_par_iter()
        .map(|i| run_chain(cfg, &model, cursor, i))
        .collect::<Result<Vec<_>>>()?;
    let mut members = Vec::new();
    let mut member_chain = Vec::new();
    let mut chains = Vec::with_capacity(runs.len());
    for (diag, samples) in runs {
        if let Some(reason) = &diag.diverged {
            log::warn!("chain {} diverged and was excluded: {reason}", diag.chain);
        }
        member_chain.extend(std::iter::repeat_n(diag.chain, samples.len()));
        members.extend(samples);
        chains.push(diag);
    }
    let diverged = chains.iter().filter(|c| c.diverged.is_some()).count();
    if diverged == cfg.n_chains {
        return Err(Error::AllChainsDiverged(diverged));
    }
    if diverged > 0 {
        log::warn!("{diverged} of {} chains diverged", cfg.n_chains);
    }
    Ok(EnsembleResult {
        members,
        member_chain,
        chains,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeCounts {
    pub counts: Vec<usize>,
    pub unassigned: usize,
    /// Nearest mode of each member, `None` beyond the threshold.
    pub assignment: Vec<Option<usize>>,
}

/// Assigns each member to its nearest mode (Euclidean) when within
/// `threshold`. Equidistant modes resolve to the lowest index.
pub fn mode_assignment(
    members: &[ParamVector],
    modes: &[ParamVector],
    threshold: f64,
) -> Result<ModeCounts> {
    if modes.is_empty() {
        return Err(Error::Data("mode set is empty".into()));
    }
    let mut counts = vec![0; modes.len()];
    let mut unassigned = 0;
    let mut assignment = Vec::with_capacity(members.len());
    for m in members {
        let mut best = (0, f64::INFINITY);
        for (j, mode) in modes.iter().enumerate() {
            Error::check_dim(mode.dim(), m.dim())?;
            let d = m
                .iter()
                .zip(mode.iter())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if d < best.1 {
                best = (j, d);
            }
        }
        if best.1 <= threshold {
            counts[best.0] += 1;
            assignment.push(Some(best.0));
        } else {
            unassigned += 1;
            assignment.push(None);
        }
    }
    Ok(ModeCounts {
        counts,
        unassigned,
        assignment,
    })
}

/// Writes `member_XXXX.json` per member and `manifest.json` into `dir`.
pub fn export_ensemble(cfg: &EnsembleConfig, result: &EnsembleResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(result.members.len());
    for (k, m) in result.members.iter().enumerate() {
        let name = format!("member_{k:04}.json");
        std::fs::write(dir.join(&name), json_floats(m) + "\n")?;
        files.push(name);
    }
    let chains: Vec<serde_json::Value> = result
        .chains
        .iter()
        .map(|c| {
            serde_json::json!({
                "chain": c.chain,
                "seed": cfg.base_seed,
                "stream": c.chain,
                "final_log_post": fmt17(c.final_log_post),
                "diverged": c.diverged,
                "n_members": c.n_members,
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "config_hash": cfg.hash(),
        "config": cfg,
        "members": files,
        "member_chain": result.member_chain,
        "chains": chains,
    });
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{double_well_target, gaussian_target};
    use crate::sgmcmc::MomentumHyper;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec()).unwrap()
    }

    fn config(n: usize, t: Temperature, init: InitStrategy, retain: Retain) -> EnsembleConfig {
        EnsembleConfig {
            n_chains: n,
            base_seed: 42,
            sampler: SamplerKind::Sghmc(MomentumHyper::new(1.0, 1.0).unwrap()),
            schedule: LrSchedule::constant(0.01).unwrap(),
            temperature: t,
            steps: 300,
            init,
            retain,
            shuffle: Shuffle::PerChain,
        }
    }

    #[test]
    fn single_chain_matches_plain_run() {
        let model: Arc<dyn LogPosteriorFn> =
            Arc::new(gaussian_target(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
        let cfg = config(
            1,
            Temperature::posterior(1),
            InitStrategy::Shared {
                point: pv(&[1.0, -1.0]),
            },
            Retain::LastOnly,
        );
        let res = run_parallel(&cfg, Arc::clone(&model), &BatchCursor::target(1)).unwrap();
        let sampler = build_sampler(
            cfg.sampler,
            model,
            cfg.schedule,
            cfg.temperature,
            Collection::default(),
        )
        .unwrap();
        let state = sampler
            .run(
                pv(&[1.0, -1.0]),
                &mut BatchCursor::target(1),
                cfg.steps,
                &mut chain_stream(42, 0),
            )
            .unwrap();
        assert_eq!(res.members, vec![state.chain.params().clone()]);
    }

    #[test]
    fn zero_temperature_shared_init_is_identical() {
        let model: Arc<dyn LogPosteriorFn> = Arc::new(double_well_target(1.0, 1.0).unwrap());
        let mut cfg = config(
            3,
            Temperature::ZERO,
            InitStrategy::Shared {
                point: pv(&[0.3, 0.2]),
            },
            Retain::LastOnly,
        );
        cfg.shuffle = Shuffle::Shared;
        let res = run_parallel(&cfg, model, &BatchCursor::target(1)).unwrap();
        assert!(res.members.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn thinned_default_burn_in_is_half() {
        let model: Arc<dyn LogPosteriorFn> =
            Arc::new(gaussian_target(vec![0.0], vec![1.0]).unwrap());
        let cfg = config(
            2,
            Temperature::posterior(1),
            InitStrategy::Jitter {
                center: pv(&[0.0]),
                std: 1.0,
            },
            Retain::Thinned {
                burn_in: None,
                thin: 10,
            },
        );
        let res = run_parallel(&cfg, model, &BatchCursor::target(1)).unwrap();
        assert_eq!(res.members.len(), 2 * 15);
        assert_eq!(res.member_chain[..15], [0; 15]);
        assert_ne!(res.chains[0].init, res.chains[1].init);
    }

    #[test]
    fn all_diverged_is_an_error() {
        let model: Arc<dyn LogPosteriorFn> =
            Arc::new(gaussian_target(vec![0.0], vec![1e-6]).unwrap());
        let mut cfg = config(
            2,
            Temperature::ZERO,
            InitStrategy::Shared { point: pv(&[1.0]) },
            Retain::LastOnly,
        );
        cfg.sampler = SamplerKind::Sgld;
        cfg.schedule = LrSchedule::constant(1.0).unwrap();
        let err = run_parallel(&cfg, model, &BatchCursor::target(1)).unwrap_err();
        assert!(matches!(err, Error::AllChainsDiverged(2)));
    }

    #[test]
    fn mode_rules() {
        let modes = [pv(&[-1.0, 0.0]), pv(&[1.0, 0.0])];
        let members = [pv(&[1.0, 0.0]), pv(&[0.0, 0.0]), pv(&[5.0, 5.0])];
        let c = mode_assignment(&members, &modes, 1.0).unwrap();
        assert_eq!(c.assignment, vec![Some(1), Some(0), None]);
        assert_eq!((c.counts, c.unassigned), (vec![1, 1], 1));
        assert!(mode_assignment(&members, &[], 1.0).is_err());
    }

    #[test]
    fn export_layout() {
        let dir = tempfile::tempdir().unwrap();
        let model: Arc<dyn LogPosteriorFn> =
            Arc::new(gaussian_target(vec![0.0], vec![1.0]).unwrap());
        let cfg = config(
            2,
            Temperature::posterior(1),
            InitStrategy::Prior {
                prior: GaussianPrior::isotropic(1, 1.0).unwrap(),
            },
            Retain::LastOnly,
        );
        let res = run_parallel(&cfg, model, &BatchCursor::target(1)).unwrap();
        export_ensemble(&cfg, &res, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("member_0001.json")).unwrap();
        let v: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(v, res.members[1].as_slice());
        let m: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("manifest.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(m["config_hash"], cfg.hash());
    }
}
