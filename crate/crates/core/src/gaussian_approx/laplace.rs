use serde::{Deserialize, Serialize};

use crate::base::ParamVector;
use crate::error::{Error, Result};
use crate::models::{Dataset, GaussianPrior, SupervisedModel};

use super::{empirical_fisher_diag, ggn_diag, DiagGaussian, GaussianMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Curvature {
    EmpiricalFisher,
    Ggn,
}

impl Curvature {
    pub fn name(self) -> &'static str {
        match self {
            Curvature::EmpiricalFisher => "empirical-fisher",
            Curvature::Ggn => "ggn",
        }
    }
}

/// Diagonal Laplace approximation around `theta_map`.
///
/// Precision is `N · F_diag(θ_MAP)` plus the prior precision when a prior is
/// given; one pass over `data` computes the curvature.
pub fn fit_laplace<M: SupervisedModel + ?Sized>(
    model: &M,
    theta_map: &ParamVector,
    data: &Dataset,
    curvature: Curvature,
    prior: Option<&GaussianPrior>,
) -> Result<DiagGaussian> {
    Error::check_dim(model.dim(), theta_map.dim())?;
    let fisher = match curvature {
        Curvature::EmpiricalFisher => empirical_fisher_diag(model, theta_map, data)?,
        Curvature::Ggn => ggn_diag(model, theta_map, data)?,
    };
    let n = data.len() as f64;
    let mut precision: Vec<f64> = fisher.iter().map(|f| n * f).collect();
    if let Some(p) = prior {
        Error::check_dim(theta_map.dim(), p.dim())?;
        for (prec, pp) in precision.iter_mut().zip(p.precision()) {
            *prec += pp;
        }
    }
    if let Some(coord) = precision.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::ZeroPrecision { coord });
    }
    DiagGaussian::new(
        theta_map.clone(),
        precision.iter().map(|p| 1.0 / p).collect(),
        GaussianMeta {
            curvature: curvature.name().into(),
            n: data.len(),
        },
    )
}
