//! Strict experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempered::models::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    Map,
    Laplace,
    Vi,
    Ensemble,
    ColdSweep,
    DoubleWellDemo,
    Predict,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::Map => "map",
            ExperimentKind::Laplace => "laplace",
            ExperimentKind::Vi => "vi",
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::ColdSweep => "cold-sweep",
            ExperimentKind::DoubleWellDemo => "double-well-demo",
            ExperimentKind::Predict => "predict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Classifier; input width and class count come from the data.
    Mlp {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
        #[serde(default = "one")]
        prior_var: f64,
    },
    Linear {
        #[serde(default = "one")]
        noise_var: f64,
        #[serde(default = "one")]
        prior_var: f64,
    },
    DoubleWell {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "two")]
        c: f64,
    },
    Gaussian {
        mean: Vec<f64>,
        variance: Vec<f64>,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Mlp {
            hidden: default_hidden(),
            activation: default_activation(),
            prior_var: 1.0,
        }
    }
}

impl ModelSpec {
    pub fn is_target(&self) -> bool {
        matches!(
            self,
            ModelSpec::DoubleWell { .. } | ModelSpec::Gaussian { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    TwoMoons {
        #[serde(default = "default_n_train")]
        n_train: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default)]
        label_flip: f64,
        #[serde(default)]
        seed: u64,
    },
    /// `y = wᵀx + N(0, noise_var)` with standard normal features.
    Linear {
        #[serde(default = "default_n_train")]
        n_train: usize,
        #[serde(default = "default_n_test")]
        n_test: usize,
        weights: Vec<f64>,
        #[serde(default = "one")]
        noise_var: f64,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        train: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test: Option<PathBuf>,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::TwoMoons {
            n_train: default_n_train(),
            n_test: default_n_test(),
            noise: default_noise(),
            label_flip: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    Sgld,
    Sghmc,
    Sgnht,
    Map,
    Mle,
    LaplaceGgn,
    LaplaceEf,
    Vi,
    SghmcSerial,
    SghmcParallel,
}

impl MethodName {
    pub fn name(self) -> &'static str {
        match self {
            MethodName::Sgld => "sgld",
            MethodName::Sghmc => "sghmc",
            MethodName::Sgnht => "sgnht",
            MethodName::Map => "map",
            MethodName::Mle => "mle",
            MethodName::LaplaceGgn => "laplace-ggn",
            MethodName::LaplaceEf => "laplace-ef",
            MethodName::Vi => "vi",
            MethodName::SghmcSerial => "sghmc-serial",
            MethodName::SghmcParallel => "sghmc-parallel",
        }
    }

    pub fn is_sampler(self) -> bool {
        matches!(
            self,
            MethodName::Sgld | MethodName::Sghmc | MethodName::Sgnht
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Prior,
    Shared,
    Jitter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetainKind {
    Last,
    Thinned,
}

/// Method and hyperparameters. Fields irrelevant to the chosen method are
/// ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSpec {
    pub name: MethodName,
    /// Posterior tempering exponent `T`; samplers run at `T / N`.
    pub temperature: f64,
    /// Sampler step size `ε`, or the SGD learning rate `γ`.
    pub lr: f64,
    /// Polynomial decay `lr (lr_b + k)^-lr_gamma`; zero keeps `lr` constant.
    pub lr_gamma: f64,
    pub lr_b: f64,
    pub momentum: f64,
    pub dampening: f64,
    pub inv_sigma_sq: f64,
    pub alpha: f64,
    pub steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub n_chains: usize,
    pub init: InitKind,
    pub jitter_std: f64,
    pub retain: RetainKind,
    pub n_mc: usize,
    pub stl: bool,
    /// Add the prior precision to the Laplace curvature.
    pub prior_precision: bool,
    /// Predict through the linearized forward map instead of parameter samples.
    pub linearized: bool,
    pub predictive_samples: usize,
}

impl Default for MethodSpec {
    fn default() -> Self {
        Self {
            name: MethodName::Sghmc,
            temperature: 1.0,
            lr: 0.01,
            lr_gamma: 0.0,
            lr_b: 1.0,
            momentum: 0.9,
            dampening: 0.0,
            inv_sigma_sq: 1.0,
            alpha: 1.0,
            steps: 1000,
            epochs: 100,
            batch_size: 32,
            burn_in: None,
            thin: 1,
            n_chains: 8,
            init: InitKind::Prior,
            jitter_std: 1.0,
            retain: RetainKind::Last,
            n_mc: 1,
            stl: true,
            prior_precision: true,
            linearized: false,
            predictive_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub temperatures: Vec<f64>,
    pub methods: Vec<MethodSpec>,
    /// Flat-prior gradient descent reported beside the sweep.
    pub mle_baseline: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        let base = MethodSpec {
            lr: 0.05,
            momentum: 0.9,
            epochs: 300,
            batch_size: 32,
            ..MethodSpec::default()
        };
        let sampler = MethodSpec {
            lr: 0.01,
            inv_sigma_sq: 1.0,
            alpha: 1.0,
            ..base.clone()
        };
        Self {
            temperatures: vec![0.03, 0.1, 0.3, 1.0],
            methods: vec![
                MethodSpec {
                    name: MethodName::Map,
                    ..base.clone()
                },
                MethodSpec {
                    name: MethodName::LaplaceGgn,
                    ..base.clone()
                },
                MethodSpec {
                    name: MethodName::Vi,
                    lr: 0.01,
                    ..base.clone()
                },
                MethodSpec {
                    name: MethodName::SghmcSerial,
                    steps: 4000,
                    burn_in: Some(2000),
                    thin: 20,
                    ..sampler.clone()
                },
                MethodSpec {
                    name: MethodName::SghmcParallel,
                    steps: 2000,
                    n_chains: 8,
                    ..sampler
                },
            ],
            mle_baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSpec {
    /// Output directory of an earlier run whose posterior is used.
    pub artifact: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predict: Option<PredictSpec>,
}

fn default_hidden() -> Vec<usize> {
    vec![16]
}
fn default_activation() -> Activation {
    Activation::Tanh
}
fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn default_n_train() -> usize {
    64
}
fn default_n_test() -> usize {
    500
}
fn default_noise() -> f64 {
    0.2
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Problems with a configuration, reported with the offending field.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de =
            toml::Deserializer::parse(text).map_err(|e| field_err("<document>", e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            field_err(
                if path == "." {
                    "<document>".into()
                } else {
                    path
                },
                inner.message().trim().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field_err(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` entry of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| field_err("<document>", e.to_string()))?;
            let cfg = v
                .get("config")
                .ok_or_else(|| field_err("config", "manifest has no config entry"))?;
            Self::from_json(&cfg.to_string())
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        use ExperimentKind as E;
        if self.seeds.is_empty() {
            return Err(field_err("seeds", "at least one seed is required"));
        }
        let single = !matches!(self.experiment, E::ColdSweep);
        if single && self.seeds.len() != 1 {
            return Err(field_err(
                "seeds",
                format!("{} takes exactly one seed", self.experiment.name()),
            ));
        }
        self.validate_model()?;
        let m = &self.method;
        let allowed: &[MethodName] = match self.experiment {
            E::Sample | E::Ensemble | E::DoubleWellDemo => {
                &[MethodName::Sgld, MethodName::Sghmc, MethodName::Sgnht]
            }
            E::Map => &[MethodName::Map, MethodName::Mle],
            E::Laplace => &[MethodName::LaplaceGgn, MethodName::LaplaceEf],
            E::Vi => &[MethodName::Vi],
            E::ColdSweep | E::Predict => &[],
        };
        if !allowed.is_empty() && !allowed.contains(&m.name) {
            let names: Vec<_> = allowed.iter().map(|n| n.name()).collect();
            return Err(field_err(
                "method.name",
                format!(
                    "{} is not valid for {}; expected one of {}",
                    m.name.name(),
                    self.experiment.name(),
                    names.join(", ")
                ),
            ));
        }
        if !allowed.is_empty() {
            validate_method("method", m)?;
        }
        match self.experiment {
            E::Map | E::Laplace | E::Vi | E::ColdSweep | E::Predict if self.model.is_target() => {
                return Err(field_err(
                    "model.kind",
                    format!("{} needs a data model", self.experiment.name()),
                ));
            }
            E::DoubleWellDemo if !matches!(self.model, ModelSpec::DoubleWell { .. }) => {
                return Err(field_err(
                    "model.kind",
                    "double-well-demo needs the double-well model",
                ));
            }
            E::ColdSweep => {
                if !matches!(self.model, ModelSpec::Mlp { .. }) {
                    return Err(field_err(
                        "model.kind",
                        "cold-sweep runs on an mlp classifier",
                    ));
                }
                if self.sweep.temperatures.is_empty()
                    || self.sweep.temperatures.iter().any(|t| !(*t > 0.0))
                {
                    return Err(field_err(
                        "sweep.temperatures",
                        "need at least one positive temperature",
                    ));
                }
                for (i, s) in self.sweep.methods.iter().enumerate() {
                    let ok = matches!(
                        s.name,
                        MethodName::Map
                            | MethodName::LaplaceGgn
                            | MethodName::LaplaceEf
                            | MethodName::Vi
                            | MethodName::SghmcSerial
                            | MethodName::SghmcParallel
                    );
                    if !ok {
                        return Err(field_err(
                            format!("sweep.methods[{i}].name"),
                            format!("{} cannot be swept", s.name.name()),
                        ));
                    }
                    validate_method(&format!("sweep.methods[{i}]"), s)?;
                }
            }
            E::Predict if self.predict.is_none() => {
                return Err(field_err(
                    "predict",
                    "predict needs [predict] artifact = <run dir>",
                ));
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_model(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(field_err(field, format!("must be positive, got {v}")))
            }
        };
        match &self.model {
            ModelSpec::Mlp {
                hidden, prior_var, ..
            } => {
                if hidden.contains(&0) {
                    return Err(field_err("model.hidden", "layer widths must be positive"));
                }
                positive("model.prior_var", *prior_var)
            }
            ModelSpec::Linear {
                noise_var,
                prior_var,
            } => {
                positive("model.noise_var", *noise_var)?;
                positive("model.prior_var", *prior_var)
            }
            ModelSpec::DoubleWell { a, c } => {
                positive("model.a", *a)?;
                positive("model.c", *c)
            }
            ModelSpec::Gaussian { mean, variance } => {
                if mean.is_empty() || mean.len() != variance.len() {
                    return Err(field_err(
                        "model.variance",
                        "mean and variance need the same non-zero length",
                    ));
                }
                variance
                    .iter()
                    .try_for_each(|v| positive("model.variance", *v))
            }
        }
    }
}

fn validate_method(prefix: &str, m: &MethodSpec) -> Result<(), ConfigError> {
    let f = |name: &str| format!("{prefix}.{name}");
    if !(m.temperature >= 0.0 && m.temperature.is_finite()) {
        return Err(field_err(
            f("temperature"),
            format!("must be non-negative, got {}", m.temperature),
        ));
    }
    if !(m.lr > 0.0 && m.lr.is_finite()) {
        return Err(field_err(
            f("lr"),
            format!("must be positive, got {}", m.lr),
        ));
    }
    if m.lr_gamma != 0.0 && !(m.lr_gamma > 0.0 && m.lr_gamma <= 1.0 && m.lr_b > 0.0) {
        return Err(field_err(
            f("lr_gamma"),
            "decay needs 0 < lr_gamma <= 1 and lr_b > 0",
        ));
    }
    if !(0.0..1.0).contains(&m.momentum) {
        return Err(field_err(
            f("momentum"),
            format!("must lie in [0, 1), got {}", m.momentum),
        ));
    }
    if !(0.0..1.0).contains(&m.dampening) {
        return Err(field_err(
            f("dampening"),
            format!("must lie in [0, 1), got {}", m.dampening),
        ));
    }
    if !(m.inv_sigma_sq > 0.0) {
        return Err(field_err(f("inv_sigma_sq"), "must be positive"));
    }
    if !(m.alpha >= 0.0) {
        return Err(field_err(f("alpha"), "must be non-negative"));
    }
    for (name, v) in [
        ("batch_size", m.batch_size),
        ("thin", m.thin),
        ("n_chains", m.n_chains),
        ("n_mc", m.n_mc),
        ("predictive_samples", m.predictive_samples),
    ] {
        if v == 0 {
            return Err(field_err(f(name), "must be at least 1"));
        }
    }
    if !(m.jitter_std >= 0.0) {
        return Err(field_err(f("jitter_std"), "must be non-negative"));
    }
    Ok(())
}
