//! Experiment recipes. Each writes its artifacts into the run directory and
//! returns the headline metrics for `summary.json`.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use tempered::base::{ParamVector, RngStream};
use tempered::ensemble::{
    export_ensemble, mode_assignment, run_parallel, EnsembleConfig, InitStrategy, Retain, Shuffle,
};
use tempered::gaussian_approx::{
    fit_laplace, fit_vi, Curvature, DiagGaussian, NelboConfig, ViFit, ViState,
};
use tempered::io::{fmt17, json_floats};
use tempered::models::Likelihood;
use tempered::optim::{fit_map, write_loss_curve, MapFit, SgdHyper};
use tempered::predict::{
    evaluate_params, linearized_predictive, logit_samples_to_categorical, score,
    write_uncertainty_csv, PredictiveEnsemble, TestMetrics,
};
use tempered::sgmcmc::{
    build_sampler, Collection, LrSchedule, MomentumHyper, SampleTrace, SamplerKind, Temperature,
};

use crate::config::{
    ExperimentConfig, ExperimentKind, InitKind, MethodName, MethodSpec, RetainKind,
};
use crate::problem::Problem;

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const PREDICT_STREAM: u64 = 4;

/// Sample means are reported in the summary up to this dimension.
const SUMMARY_MAX_DIM: usize = 10;

pub fn run_experiment(cfg: &ExperimentConfig, problem: &Problem, out: &Path) -> Result<Value> {
    let seed = cfg.seeds[0];
    let m = &cfg.method;
    match cfg.experiment {
        ExperimentKind::Sample => sample(problem, m, seed, out),
        ExperimentKind::Map => map(problem, m, seed, out),
        ExperimentKind::Laplace => laplace(problem, m, seed, out),
        ExperimentKind::Vi => vi(problem, m, seed, out),
        ExperimentKind::Ensemble => ensemble(problem, m, seed, out),
        ExperimentKind::ColdSweep => cold_sweep(cfg, problem, out),
        ExperimentKind::DoubleWellDemo => double_well_demo(problem, m, seed, out),
        ExperimentKind::Predict => bail!("predict runs through the artifact loader"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn sampler_kind(m: &MethodSpec) -> Result<SamplerKind> {
    let hyper = || MomentumHyper::new(m.inv_sigma_sq, m.alpha);
    Ok(match m.name {
        MethodName::Sgld => SamplerKind::Sgld,
        MethodName::Sghmc | MethodName::SghmcSerial | MethodName::SghmcParallel => {
            SamplerKind::Sghmc(hyper()?)
        }
        MethodName::Sgnht => SamplerKind::Sgnht(hyper()?),
        other => bail!("{} is not a sampler", other.name()),
    })
}

pub fn schedule(m: &MethodSpec) -> Result<LrSchedule> {
    Ok(if m.lr_gamma == 0.0 {
        LrSchedule::constant(m.lr)?
    } else {
        LrSchedule::polynomial(m.lr, m.lr_b, m.lr_gamma, false)?
    })
}

fn sgd_hyper(m: &MethodSpec) -> Result<SgdHyper> {
    Ok(SgdHyper::new(m.lr, m.momentum, m.dampening)?)
}

fn shuffle_seed(seed: u64) -> u64 {
    RngStream::new(seed, SHUFFLE_STREAM).next_u64()
}

fn initial(problem: &Problem, seed: u64) -> ParamVector {
    problem.init(&mut RngStream::new(seed, INIT_STREAM))
}

fn metrics_json(m: &TestMetrics, preds: &[PredictiveEnsemble]) -> Value {
    match preds.first() {
        Some(PredictiveEnsemble::Categorical { .. }) => {
            json!({ "test_loss": m.loss, "test_accuracy": m.accuracy })
        }
        _ => json!({ "test_loss": m.loss }),
    }
}

fn write_params(path: &Path, p: &ParamVector) -> Result<()> {
    std::fs::write(path, json_floats(p) + "\n")?;
    Ok(())
}

/// Predictions from parameter draws, or `None` when there is nothing to score.
fn score_params(
    problem: &Problem,
    params: &[ParamVector],
) -> Result<Option<(Vec<PredictiveEnsemble>, TestMetrics)>> {
    match problem.supervised() {
        Some(sup) if !problem.test.is_empty() && !params.is_empty() => {
            Ok(Some(evaluate_params(sup.as_ref(), params, &problem.test)?))
        }
        _ => Ok(None),
    }
}

/// Predictions under a diagonal Gaussian posterior: parameter draws, or the
/// linearized forward map when `m.linearized` is set.
fn score_gaussian(
    problem: &Problem,
    g: &DiagGaussian,
    m: &MethodSpec,
    rng: &mut RngStream,
) -> Result<Option<(Vec<PredictiveEnsemble>, TestMetrics)>> {
    let Some(sup) = problem.supervised() else {
        return Ok(None);
    };
    if problem.test.is_empty() {
        return Ok(None);
    }
    if !m.linearized {
        let draws = g.sample(m.predictive_samples, rng);
        return score_params(problem, &draws);
    }
    let mut preds = Vec::with_capacity(problem.test.len());
    for x in problem.test.inputs() {
        let lin = linearized_predictive(g, sup.as_ref(), x)?;
        let p = match sup.likelihood() {
            Likelihood::Categorical { .. } => {
                logit_samples_to_categorical(&lin, m.predictive_samples, rng)?
            }
            Likelihood::Gaussian { noise_var } => PredictiveEnsemble::gaussian(
                vec![lin.mean],
                vec![lin.variance.iter().map(|v| v + noise_var).collect()],
            )?,
        };
        preds.push(p);
    }
    let metrics = score(&preds, &problem.test)?;
    Ok(Some((preds, metrics)))
}

fn attach(
    summary: &mut Value,
    scored: &Option<(Vec<PredictiveEnsemble>, TestMetrics)>,
    out: &Path,
) -> Result<()> {
    if let Some((preds, m)) = scored {
        summary["test"] = metrics_json(m, preds);
        write_uncertainty_csv(preds, create(&out.join("uncertainty.csv"))?)?;
    }
    Ok(())
}

fn run_chain(problem: &Problem, m: &MethodSpec, t: f64, seed: u64) -> Result<SampleTrace> {
    let temperature = Temperature::from_tempering(t, problem.n())?;
    let collection = Collection::new(m.burn_in.unwrap_or(m.steps / 2), m.thin);
    let sampler = build_sampler(
        sampler_kind(m)?,
        problem.posterior(),
        schedule(m)?,
        temperature,
        collection,
    )?;
    let mut cursor = problem.cursor(m.batch_size, shuffle_seed(seed))?;
    let state = sampler.run(
        initial(problem, seed),
        &mut cursor,
        m.steps,
        &mut RngStream::new(seed, NOISE_STREAM),
    )?;
    Ok(state.trace)
}

fn sample(problem: &Problem, m: &MethodSpec, seed: u64, out: &Path) -> Result<Value> {
    let trace = run_chain(problem, m, m.temperature, seed)?;
    trace.write_csv(create(&out.join("trace.csv"))?)?;
    let mut summary = json!({
        "steps": trace.steps(),
        "samples": trace.samples.len(),
        "final_log_post": trace.log_post.last().copied(),
    });
    if !trace.samples.is_empty() && problem.dim() <= SUMMARY_MAX_DIM {
        summary["sample_mean"] = json!(trace.mean());
    }
    attach(&mut summary, &score_params(problem, &trace.samples)?, out)?;
    Ok(summary)
}

fn fit_point(problem: &Problem, m: &MethodSpec, seed: u64) -> Result<MapFit> {
    let mut cursor = problem.cursor(m.batch_size, shuffle_seed(seed))?;
    Ok(fit_map(
        problem.posterior(),
        initial(problem, seed),
        sgd_hyper(m)?,
        m.epochs,
        &mut cursor,
    )?)
}

fn map(problem: &Problem, m: &MethodSpec, seed: u64, out: &Path) -> Result<Value> {
    let flat;
    let problem = if m.name == MethodName::Mle {
        flat = problem.without_prior()?;
        &flat
    } else {
        problem
    };
    let fit = fit_point(problem, m, seed)?;
    write_params(&out.join("params.json"), &fit.params)?;
    write_loss_curve(&fit.loss_curve, create(&out.join("loss.csv"))?)?;
    let mut summary = json!({
        "steps": fit.loss_curve.len(),
        "final_loss": fit.loss_curve.last().copied(),
    });
    attach(
        &mut summary,
        &score_params(problem, std::slice::from_ref(&fit.params))?,
        out,
    )?;
    Ok(summary)
}

fn laplace_fit(problem: &Problem, m: &MethodSpec, seed: u64) -> Result<(MapFit, DiagGaussian)> {
    let sup = problem.supervised().context("laplace needs a data model")?;
    let fit = fit_point(problem, m, seed)?;
    let curvature = match m.name {
        MethodName::LaplaceEf => Curvature::EmpiricalFisher,
        _ => Curvature::Ggn,
    };
    let prior = problem.prior().filter(|_| m.prior_precision);
    let g = fit_laplace(
        sup.as_ref(),
        &fit.params,
        &problem.train,
        curvature,
        prior.as_ref(),
    )?;
    Ok((fit, g))
}

fn laplace(problem: &Problem, m: &MethodSpec, seed: u64, out: &Path) -> Result<Value> {
    let (fit, g) = laplace_fit(problem, m, seed)?;
    let g = g.tempered(m.temperature)?;
    g.save(&out.join("posterior.json"))?;
    write_loss_curve(&fit.loss_curve, create(&out.join("loss.csv"))?)?;
    let mut summary = json!({
        "curvature": g.meta.curvature,
        "mean_variance": g.diag_variance.iter().sum::<f64>() / g.dim() as f64,
    });
    let scored = score_gaussian(problem, &g, m, &mut RngStream::new(seed, PREDICT_STREAM))?;
    attach(&mut summary, &scored, out)?;
    Ok(summary)
}

fn vi_fit(problem: &Problem, m: &MethodSpec, t: f64, seed: u64) -> Result<ViFit> {
    let mut cursor = problem.cursor(m.batch_size, shuffle_seed(seed))?;
    let cfg = NelboConfig {
        n_mc: m.n_mc,
        stl: m.stl,
        temperature: t,
    };
    Ok(fit_vi(
        problem.posterior().as_ref(),
        ViState::at(initial(problem, seed)),
        &mut cursor,
        m.epochs,
        sgd_hyper(m)?,
        cfg,
        &mut RngStream::new(seed, NOISE_STREAM),
    )?)
}

fn vi(problem: &Problem, m: &MethodSpec, seed: u64, out: &Path) -> Result<Value> {
    let fit = vi_fit(problem, m, m.temperature, seed)?;
    let g = fit.state.to_gaussian(problem.n())?;
    g.save(&out.join("posterior.json"))?;
    let mut w = csv::Writer::from_writer(create(&out.join("nelbo.csv"))?);
    w.write_record(["step", "nelbo"])?;
    for (k, v) in fit.nelbo_curve.iter().enumerate() {
        w.write_record([k.to_string(), fmt17(*v)])?;
    }
    w.flush()?;
    let mut summary = json!({
        "steps": fit.nelbo_curve.len(),
        "nelbo_running": fit.state.nelbo_running,
    });
    let scored = score_gaussian(problem, &g, m, &mut RngStream::new(seed, PREDICT_STREAM))?;
    attach(&mut summary, &scored, out)?;
    Ok(summary)
}

pub fn ensemble_config(
    problem: &Problem,
    m: &MethodSpec,
    t: f64,
    seed: u64,
) -> Result<EnsembleConfig> {
    let center = initial(problem, seed);
    let init = match m.init {
        InitKind::Shared => InitStrategy::Shared { point: center },
        InitKind::Jitter => InitStrategy::Jitter {
            center,
            std: m.jitter_std,
        },
        InitKind::Prior => match problem.prior() {
            Some(prior) => InitStrategy::Prior { prior },
            None => InitStrategy::Jitter {
                center: ParamVector::zeros(problem.dim()),
                std: m.jitter_std,
            },
        },
    };
    let retain = match m.retain {
        RetainKind::Last => Retain::LastOnly,
        RetainKind::Thinned => Retain::Thinned {
            burn_in: m.burn_in,
            thin: m.thin,
        },
    };
    Ok(EnsembleConfig {
        n_chains: m.n_chains,
        base_seed: seed,
        sampler: sampler_kind(m)?,
        schedule: schedule(m)?,
        temperature: Temperature::from_tempering(t, problem.n())?,
        steps: m.steps,
        init,
        retain,
        shuffle: Shuffle::PerChain,
    })
}

fn ensemble(problem: &Problem, m: &MethodSpec, seed: u64, out: &Path) -> Result<Value> {
    let ecfg = ensemble_config(problem, m, m.temperature, seed)?;
    let cursor = problem.cursor(m.batch_size, shuffle_seed(seed))?;
    let result = run_parallel(&ecfg, problem.posterior(), &cursor)?;
    export_ensemble(&ecfg, &result, &out.join("ensemble"))?;
    let mut summary = json!({
        "config_hash": ecfg.hash(),
        "members": result.members.len(),
        "diverged_chains": result.n_diverged(),
    });
    attach(&mut summary, &score_params(problem, &result.members)?, out)?;
    Ok(summary)
}

fn write_points(path: &Path, points: &[ParamVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let d = points.first().map_or(0, ParamVector::dim);
    let mut header = vec!["sample".to_string()];
    header.extend((0..d).map(|j| format!("theta_{j}")));
    w.write_record(&header)?;
    for (k, p) in points.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(p.iter().map(|v| fmt17(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Deep ensemble (zero temperature), one long chain started in a single
/// basin, and parallel chains at the configured temperature.
fn double_well_demo(problem: &Problem, m: &MethodSpec, seed: u64, out: &Path) -> Result<Value> {
    let target = problem
        .target_density()
        .context("double-well-demo needs a density")?;
    let modes = target.mode_set().to_vec();
    let jitter = MethodSpec {
        init: InitKind::Jitter,
        retain: RetainKind::Last,
        ..m.clone()
    };
    let cursor = problem.cursor(1, 0)?;

    let mut deep = ensemble_config(problem, &jitter, 0.0, seed)?;
    deep.init = InitStrategy::Jitter {
        center: ParamVector::zeros(problem.dim()),
        std: m.jitter_std,
    };
    let deep_run = run_parallel(&deep, problem.posterior(), &cursor)?;

    let mut par = deep.clone();
    par.temperature = Temperature::from_tempering(m.temperature, problem.n())?;
    let par_run = run_parallel(&par, problem.posterior(), &cursor)?;

    let collection = Collection::new(m.burn_in.unwrap_or(m.steps / 2), m.thin);
    let temperature = Temperature::from_tempering(m.temperature, problem.n())?;
    let serial = build_sampler(
        sampler_kind(m)?,
        problem.posterior(),
        schedule(m)?,
        temperature,
        collection,
    )?;
    let serial_run = serial.run(
        modes[0].clone(),
        &mut cursor.clone(),
        m.steps,
        &mut RngStream::new(seed, NOISE_STREAM),
    )?;

    write_points(&out.join("deep_ensemble.csv"), &deep_run.members)?;
    write_points(&out.join("serial.csv"), &serial_run.trace.samples)?;
    write_points(&out.join("parallel.csv"), &par_run.members)?;

    let describe = |members: &[ParamVector], diverged: usize| -> Result<Value> {
        let nearest = mode_assignment(members, &modes, f64::INFINITY)?;
        let max_dist = members
            .iter()
            .zip(&nearest.assignment)
            .filter_map(|(p, a)| a.map(|j| dist(p, &modes[j])))
            .fold(0.0, f64::max);
        let balance = if members.is_empty() {
            None
        } else {
            Some(nearest.counts[0] as f64 / members.len() as f64)
        };
        Ok(json!({
            "samples": members.len(),
            "mode_counts": nearest.counts,
            "mode_balance": balance,
            "max_distance_to_mode": max_dist,
            "diverged_chains": diverged,
        }))
    };
    Ok(json!({
        "modes": modes.iter().map(|m| m.as_slice().to_vec()).collect::<Vec<_>>(),
        "deep_ensemble": describe(&deep_run.members, deep_run.n_diverged())?,
        "serial": describe(&serial_run.trace.samples, 0)?,
        "parallel": describe(&par_run.members, par_run.n_diverged())?,
    }))
}

fn dist(a: &ParamVector, b: &ParamVector) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// One row of `cold_sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: MethodName,
    pub temperature: f64,
    pub seed: u64,
    pub metrics: TestMetrics,
}

fn sweep_method(
    problem: &Problem,
    m: &MethodSpec,
    temps: &[f64],
    seed: u64,
) -> Result<Vec<TestMetrics>> {
    let sup = problem
        .supervised()
        .context("cold-sweep needs a classifier")?;
    let test = &problem.test;
    let mut rows = Vec::with_capacity(temps.len());
    match m.name {
        MethodName::Map => {
            let fit = fit_point(problem, m, seed)?;
            let (_, metrics) =
                evaluate_params(sup.as_ref(), std::slice::from_ref(&fit.params), test)?;
            rows.extend(temps.iter().map(|_| metrics));
        }
        MethodName::LaplaceGgn | MethodName::LaplaceEf => {
            let (_, g) = laplace_fit(problem, m, seed)?;
            for &t in temps {
                let mut rng = RngStream::new(seed, PREDICT_STREAM);
                let (_, metrics) = score_gaussian(problem, &g.tempered(t)?, m, &mut rng)?
                    .context("empty test set")?;
                rows.push(metrics);
            }
        }
        MethodName::Vi => {
            for &t in temps {
                let g = vi_fit(problem, m, t, seed)?
                    .state
                    .to_gaussian(problem.n())?;
                let mut rng = RngStream::new(seed, PREDICT_STREAM);
                let (_, metrics) =
                    score_gaussian(problem, &g, m, &mut rng)?.context("empty test set")?;
                rows.push(metrics);
            }
        }
        MethodName::SghmcSerial => {
            for &t in temps {
                let trace = run_chain(problem, m, t, seed)?;
                if trace.samples.is_empty() {
                    bail!("sghmc-serial kept no samples; lower burn_in or thin");
                }
                rows.push(evaluate_params(sup.as_ref(), &trace.samples, test)?.1);
            }
        }
        MethodName::SghmcParallel => {
            for &t in temps {
                let ecfg = ensemble_config(problem, m, t, seed)?;
                let cursor = problem.cursor(m.batch_size, shuffle_seed(seed))?;
                let result = run_parallel(&ecfg, problem.posterior(), &cursor)?;
                rows.push(evaluate_params(sup.as_ref(), &result.members, test)?.1);
            }
        }
        other => bail!("{} cannot be swept", other.name()),
    }
    Ok(rows)
}

/// Every method at every temperature and seed on one fixed split.
pub fn sweep_rows(cfg: &ExperimentConfig, problem: &Problem) -> Result<Vec<SweepRow>> {
    let temps = &cfg.sweep.temperatures;
    let mut rows = Vec::new();
    for m in &cfg.sweep.methods {
        for &seed in &cfg.seeds {
            log::info!("cold sweep: {} seed {seed}", m.name.name());
            let metrics = sweep_method(problem, m, temps, seed)
                .with_context(|| format!("{} with seed {seed}", m.name.name()))?;
            rows.extend(temps.iter().zip(metrics).map(|(&t, metrics)| SweepRow {
                method: m.name,
                temperature: t,
                seed,
                metrics,
            }));
        }
    }
    rows.sort_by(|a, b| {
        let ia = cfg.sweep.methods.iter().position(|m| m.name == a.method);
        let ib = cfg.sweep.methods.iter().position(|m| m.name == b.method);
        ia.cmp(&ib)
            .then(a.temperature.total_cmp(&b.temperature))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(rows)
}

fn cold_sweep(cfg: &ExperimentConfig, problem: &Problem, out: &Path) -> Result<Value> {
    let rows = sweep_rows(cfg, problem)?;
    let mut w = csv::Writer::from_writer(create(&out.join("cold_sweep.csv"))?);
    w.write_record([
        "method",
        "temperature",
        "seed",
        "test_loss",
        "test_accuracy",
    ])?;
    for r in &rows {
        w.write_record([
            r.method.name().to_string(),
            fmt17(r.temperature),
            r.seed.to_string(),
            fmt17(r.metrics.loss),
            fmt17(r.metrics.accuracy),
        ])?;
    }
    w.flush()?;

    let mut cells = Vec::new();
    for m in &cfg.sweep.methods {
        for &t in &cfg.sweep.temperatures {
            let sel: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.method == m.name && r.temperature == t)
                .collect();
            let n = sel.len() as f64;
            cells.push(json!({
                "method": m.name.name(),
                "temperature": t,
                "mean_test_loss": sel.iter().map(|r| r.metrics.loss).sum::<f64>() / n,
                "mean_test_accuracy": sel.iter().map(|r| r.metrics.accuracy).sum::<f64>() / n,
            }));
        }
    }
    let mut summary = json!({ "rows": rows.len(), "cells": cells });

    if cfg.sweep.mle_baseline {
        let base = cfg
            .sweep
            .methods
            .iter()
            .find(|m| m.name == MethodName::Map)
            .cloned()
            .unwrap_or_default();
        let flat = problem.without_prior()?;
        let sup = flat.supervised().context("cold-sweep needs a classifier")?;
        let mut w = csv::Writer::from_writer(create(&out.join("mle_baseline.csv"))?);
        w.write_record(["seed", "test_loss", "test_accuracy"])?;
        let mut mle = Vec::new();
        for &seed in &cfg.seeds {
            let fit = fit_point(&flat, &base, seed)?;
            let (_, metrics) =
                evaluate_params(sup.as_ref(), std::slice::from_ref(&fit.params), &flat.test)?;
            w.write_record([
                seed.to_string(),
                fmt17(metrics.loss),
                fmt17(metrics.accuracy),
            ])?;
            mle.push(json!({ "seed": seed, "test_loss": metrics.loss, "test_accuracy": metrics.accuracy }));
        }
        w.flush()?;
        summary["mle"] = json!(mle);
    }
    Ok(summary)
}

/// Scores the posterior stored in an earlier run directory on that run's
/// test set and writes `uncertainty.csv`.
pub fn predict_from_artifact(
    source: &ExperimentConfig,
    problem: &Problem,
    artifact: &Path,
    m: &MethodSpec,
    seed: u64,
    out: &Path,
) -> Result<Value> {
    if problem.test.is_empty() {
        bail!("artifact {} has no test set", artifact.display());
    }
    let mut rng = RngStream::new(seed, PREDICT_STREAM);
    let scored = match source.experiment {
        ExperimentKind::Map => {
            let text = std::fs::read_to_string(artifact.join("params.json"))?;
            let p = ParamVector::new(serde_json::from_str(&text)?)?;
            score_params(problem, &[p])?
        }
        ExperimentKind::Laplace | ExperimentKind::Vi => {
            let g = DiagGaussian::load(&artifact.join("posterior.json"))?;
            score_gaussian(problem, &g, m, &mut rng)?
        }
        ExperimentKind::Sample => score_params(problem, &read_trace(&artifact.join("trace.csv"))?)?,
        ExperimentKind::Ensemble => {
            score_params(problem, &read_members(&artifact.join("ensemble"))?)?
        }
        other => bail!("cannot predict from a {} run", other.name()),
    };
    let (preds, metrics) = scored.context("the artifact holds no parameter samples")?;
    write_uncertainty_csv(&preds, create(&out.join("uncertainty.csv"))?)?;
    let n = preds.len() as f64;
    let us: Vec<_> = preds.iter().map(|p| p.uncertainty()).collect();
    Ok(json!({
        "source": source.experiment.name(),
        "test": metrics_json(&metrics, &preds),
        "mean_tu": us.iter().map(|u| u.tu).sum::<f64>() / n,
        "mean_au": us.iter().map(|u| u.au).sum::<f64>() / n,
        "mean_eu": us.iter().map(|u| u.eu).sum::<f64>() / n,
    }))
}

fn read_trace(path: &Path) -> Result<Vec<ParamVector>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let cols: Vec<usize> = r
        .headers()?
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("theta_"))
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = cols
            .iter()
            .map(|&i| rec[i].parse::<f64>())
            .collect::<Result<Vec<_>, _>>()?;
        out.push(ParamVector::new(v)?);
    }
    Ok(out)
}

fn read_members(dir: &Path) -> Result<Vec<ParamVector>> {
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
    let names = manifest["members"]
        .as_array()
        .context("ensemble manifest lists no members")?;
    names
        .iter()
        .map(|n| {
            let name = n.as_str().context("member name is not a string")?;
            let v: Vec<f64> = serde_json::from_str(&std::fs::read_to_string(dir.join(name))?)?;
            Ok(ParamVector::new(v)?)
        })
        .collect()
}
