use std::io::Write;

use crate::base::ParamVector;
use crate::error::Result;
use crate::io::fmt17;

/// Burn-in and thinning policy. After step `k` (1-based) a sample is kept
/// when `k > burn_in` and `(k - burn_in) % thin == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collection {
    pub burn_in: usize,
    pub thin: usize,
}

impl Collection {
    pub fn new(burn_in: usize, thin: usize) -> Self {
        Self {
            burn_in,
            thin: thin.max(1),
        }
    }

    pub fn keeps(&self, step: usize) -> bool {
        step > self.burn_in && (step - self.burn_in) % self.thin == 0
    }

    pub fn expected_count(&self, steps: usize) -> usize {
        steps.saturating_sub(self.burn_in) / self.thin
    }
}

impl Default for Collection {
    fn default() -> Self {
        Self::new(0, 1)
    }
}

/// Thinned samples plus per-step scalars of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTrace {
    pub collection: Collection,
    pub samples: Vec<ParamVector>,
    /// 1-based step index of each kept sample.
    pub sample_steps: Vec<usize>,
    /// Log posterior evaluated at the parameters each step started from.
    pub log_post: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl SampleTrace {
    pub fn new(collection: Collection) -> Self {
        Self {
            collection,
            samples: Vec::new(),
            sample_steps: Vec::new(),
            log_post: Vec::new(),
            epsilon: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.log_post.len()
    }

    pub(crate) fn record(&mut self, params: &ParamVector, log_post: f64, eps: f64) {
        self.log_post.push(log_post);
        self.epsilon.push(eps);
        let k = self.log_post.len();
        if self.collection.keeps(k) {
            self.samples.push(params.clone());
            self.sample_steps.push(k);
        }
    }

    /// Per-coordinate sample means.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.samples.first().map_or(0, |s| s.dim());
        let n = self.samples.len() as f64;
        (0..d)
            .map(|j| self.samples.iter().map(|s| s[j]).sum::<f64>() / n)
            .collect()
    }

    /// Per-coordinate unbiased sample variances.
    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let n = self.samples.len() as f64;
        mean.iter()
            .enumerate()
            .map(|(j, m)| self.samples.iter().map(|s| (s[j] - m).powi(2)).sum::<f64>() / (n - 1.0))
            .collect()
    }

    /// CSV `step,epsilon,log_post,theta_0..theta_{d-1}`, kept rows only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.samples.first().map_or(0, |s| s.dim());
        let mut header = vec!["step".to_string(), "epsilon".into(), "log_post".into()];
        header.extend((0..d).map(|j| format!("theta_{j}")));
        w.write_record(&header)?;
        for (s, &k) in self.samples.iter().zip(&self.sample_steps) {
            let mut row = vec![
                k.to_string(),
                fmt17(self.epsilon[k - 1]),
                fmt17(self.log_post[k - 1]),
            ];
            row.extend(s.iter().map(|&v| fmt17(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collection_counting() {
        let c = Collection::new(5, 2);
        assert_eq!(
            (1..=9).filter(|&k| c.keeps(k)).collect::<Vec<_>>(),
            vec![7, 9]
        );
        assert_eq!(c.expected_count(9), 2);
        assert_eq!(c.expected_count(0), 0);
    }

    #[test]
    fn csv_layout() {
        let mut t = SampleTrace::new(Collection::new(1, 1));
        t.record(&ParamVector::new(vec![1.0, 2.0]).unwrap(), -1.0, 0.5);
        t.record(&ParamVector::new(vec![3.0, 4.0]).unwrap(), -2.0, 0.25);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,epsilon,log_post,theta_0,theta_1");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("2,2.5000000000000000e-1,"));
    }
}
