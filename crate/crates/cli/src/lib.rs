//! Experiment runner for the tempered engine: strict TOML configs, method
//! dispatch, and CSV/JSON/plot-data emission.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod problem;

use std::path::{Path, PathBuf};

use serde_json::json;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, MethodName, MethodSpec};
use problem::Problem;

/// Environment variable naming the default root for run directories.
pub const OUTPUT_ROOT_VAR: &str = "ENGINE_OUTPUT_ROOT";

/// A failed command, classified for the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("diverged: {0:#}")]
    Diverged(anyhow::Error),
    #[error("{0:#}")]
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Diverged(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let diverged = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<tempered::Error>(),
                Some(tempered::Error::Diverged { .. } | tempered::Error::AllChainsDiverged(_))
            )
        });
        if diverged {
            Failure::Diverged(e)
        } else {
            Failure::Other(e)
        }
    }
}

/// Loads a config (TOML or run manifest) and makes its file paths absolute,
/// relative to the config's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &mut PathBuf| -> Result<(), Failure> {
        let joined = if p.is_absolute() {
            p.clone()
        } else {
            base.join(&*p)
        };
        *p = std::path::absolute(&joined).map_err(|e| Failure::Other(e.into()))?;
        Ok(())
    };
    if let config::DataSpec::Csv { train, test } = &mut cfg.data {
        resolve(train)?;
        if let Some(t) = test {
            resolve(t)?;
        }
    }
    if let Some(p) = &mut cfg.predict {
        resolve(&mut p.artifact)?;
    }
    if let Some(o) = &mut cfg.output_dir {
        resolve(o)?;
    }
    Ok(cfg)
}

/// `--out`, then the config's `output_dir`, then `$ENGINE_OUTPUT_ROOT/<kind>`,
/// then `runs/<kind>`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    if let Some(o) = &cfg.output_dir {
        return o.clone();
    }
    let root =
        std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    root.join(cfg.experiment.name())
}

/// Runs `cfg` into `out`, writing `manifest.json`, the method artifacts and
/// `summary.json`.
pub fn run_config(cfg: &ExperimentConfig, out: &Path) -> Result<serde_json::Value, Failure> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| {
        Failure::Other(anyhow::Error::new(e).context(format!("creating {}", out.display())))
    })?;
    let mut resolved = cfg.clone();
    resolved.output_dir = None;
    let manifest = json!({
        "engine": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.name(),
        "seeds": cfg.seeds,
        "config": resolved,
    });
    write_json(&out.join("manifest.json"), &manifest)?;

    let summary = if cfg.experiment == ExperimentKind::Predict {
        let artifact = &cfg.predict.as_ref().expect("validated").artifact;
        let source = ExperimentConfig::load(&artifact.join("manifest.json"))?;
        let problem = Problem::build(&source.model, &source.data)?;
        experiments::predict_from_artifact(
            &source,
            &problem,
            artifact,
            &cfg.method,
            cfg.seeds[0],
            out,
        )?
    } else {
        let problem = Problem::build(&cfg.model, &cfg.data)?;
        experiments::run_experiment(cfg, &problem, out)?
    };
    let summary = json!({ "experiment": cfg.experiment.name(), "metrics": summary });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("json value serializes") + "\n";
    std::fs::write(path, text).map_err(|e| {
        Failure::Other(anyhow::Error::new(e).context(format!("writing {}", path.display())))
    })
}

/// Loads and runs a config file; returns the run directory. With
/// `no_prior_precision` Laplace curvature omits the prior precision.
pub fn run_path(
    path: &Path,
    out: Option<&Path>,
    no_prior_precision: bool,
) -> Result<PathBuf, Failure> {
    let mut cfg = load_config(path)?;
    if no_prior_precision {
        cfg.method.prior_precision = false;
        for m in &mut cfg.sweep.methods {
            m.prior_precision = false;
        }
    }
    let dir = output_dir(&cfg, out);
    run_config(&cfg, &dir)?;
    Ok(dir)
}
