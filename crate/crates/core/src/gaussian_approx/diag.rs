use std::path::Path;

use serde::Deserialize;

use crate::base::{ParamVector, RngStream};
use crate::error::{Error, Result};
use crate::io::json_floats;

/// Where a diagonal Gaussian came from and how much data it summarizes.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMeta {
    pub curvature: String,
    #[serde(rename = "N")]
    pub n: usize,
}

/// Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagGaussian {
    pub mean: ParamVector,
    pub diag_variance: Vec<f64>,
    pub meta: GaussianMeta,
}

impl DiagGaussian {
    pub fn new(mean: ParamVector, diag_variance: Vec<f64>, meta: GaussianMeta) -> Result<Self> {
        Error::check_dim(mean.dim(), diag_variance.len())?;
        if let Some(i) = diag_variance
            .iter()
            .position(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidHyper(format!(
                "variance at {i} must be positive and finite, got {}",
                diag_variance[i]
            )));
        }
        Ok(Self {
            mean,
            diag_variance,
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn std(&self) -> Vec<f64> {
        self.diag_variance.iter().map(|v| v.sqrt()).collect()
    }

    /// Posterior raised to `1/t`: variances scale by `t`.
    pub fn tempered(&self, t: f64) -> Result<Self> {
        DiagGaussian::new(
            self.mean.clone(),
            self.diag_variance.iter().map(|v| v * t).collect(),
            self.meta.clone(),
        )
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(self.mean.iter())
            .zip(&self.diag_variance)
            .map(|((t, m), v)| {
                -0.5 * (t - m).powi(2) / v - 0.5 * (2.0 * std::f64::consts::PI * v).ln()
            })
            .sum()
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Vec<ParamVector> {
        let std = self.std();
        sample_diag(&self.mean, &std, n, rng)
    }

    pub fn to_json(&self) -> String {
        format!(
            "{{\n  \"mean\": {},\n  \"diag_variance\": {},\n  \"meta\": {{\"curvature\": {}, \"N\": {}}}\n}}\n",
            json_floats(&self.mean),
            json_floats(&self.diag_variance),
            serde_json::to_string(&self.meta.curvature).expect("string serializes"),
            self.meta.n
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: DiagGaussian = serde_json::from_str(s)?;
        DiagGaussian::new(g.mean, g.diag_variance, g.meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn sample_diag(
    mean: &[f64],
    std: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Vec<ParamVector> {
    (0..n)
        .map(|_| {
            let v = mean
                .iter()
                .zip(std)
                .map(|(m, s)| m + s * rng.standard_normal())
                .collect();
            ParamVector::new(v).expect("finite draw")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> GaussianMeta {
        GaussianMeta {
            curvature: "ggn".into(),
            n: 3,
        }
    }

    #[test]
    fn degenerate_concentration() {
        let g = DiagGaussian::new(
            ParamVector::new(vec![1.0, -2.0]).unwrap(),
            vec![1e-20, 1e-20],
            meta(),
        )
        .unwrap();
        for s in g.sample(100, &mut RngStream::new(0, 0)) {
            assert!((s[0] - 1.0).abs() < 1e-9 && (s[1] + 2.0).abs() < 1e-9);
            assert!(g.log_density(&s).is_finite());
        }
    }

    #[test]
    fn moment_check() {
        let g = DiagGaussian::new(ParamVector::zeros(2), vec![1.0, 4.0], meta()).unwrap();
        let s = g.sample(10_000, &mut RngStream::new(2, 0));
        for (j, &target) in [1.0, 4.0].iter().enumerate() {
            let m = s.iter().map(|p| p[j]).sum::<f64>() / s.len() as f64;
            let v = s.iter().map(|p| (p[j] - m).powi(2)).sum::<f64>() / (s.len() - 1) as f64;
            assert!((v / target - 1.0).abs() < 0.1, "coord {j}: {v}");
        }
        assert_eq!(
            g.sample(3, &mut RngStream::new(9, 9)),
            g.sample(3, &mut RngStream::new(9, 9))
        );
    }

    #[test]
    fn zero_variance_rejected() {
        assert!(DiagGaussian::new(ParamVector::zeros(1), vec![0.0], meta()).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let g = DiagGaussian::new(
            ParamVector::new(vec![0.1, 1.0 / 3.0]).unwrap(),
            vec![2.0, 1e-7],
            meta(),
        )
        .unwrap();
        let text = g.to_json();
        assert!(text.contains("\"N\": 3"));
        assert!(text.contains("3.3333333333333331e-1"));
        assert_eq!(DiagGaussian::from_json(&text).unwrap(), g);
    }
}
