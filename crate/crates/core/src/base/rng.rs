use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::params::ParamVector;

/// Counter-based random stream keyed by `(seed, stream_id)`.
///
/// ChaCha's 64-bit stream selector gives every chain its own sequence without
/// any coordination; equal keys replay bit-identical draws.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream for a named sub-purpose (initialization, shuffling, ...).
    /// Does not advance `self`.
    pub fn child(&self, tag: u64) -> RngStream {
        RngStream::new(
            splitmix64(self.seed ^ splitmix64(tag.wrapping_add(0x5eed))),
            self.stream_id,
        )
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.standard_normal();
        }
    }

    pub fn gaussian_noise(&mut self, dim: usize) -> ParamVector {
        let mut v = vec![0.0; dim];
        self.fill_normal(&mut v);
        ParamVector::new(v).expect("normal draws are finite")
    }

    pub(crate) fn inner(&mut self) -> &mut impl RngCore {
        &mut self.rng
    }
}

/// Free-function form of [`RngStream::gaussian_noise`].
pub fn gaussian_noise(dim: usize, rng: &mut RngStream) -> ParamVector {
    rng.gaussian_noise(dim)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_replays() {
        let a = RngStream::new(7, 3).gaussian_noise(3);
        let b = RngStream::new(7, 3).gaussian_noise(3);
        assert_eq!(a, b);
    }

    #[test]
    fn large_draw_moments() {
        let v = RngStream::new(11, 0).gaussian_noise(100_000);
        let n = v.dim() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let a = RngStream::new(5, 0).gaussian_noise(10_000);
        let b = RngStream::new(5, 1).gaussian_noise(10_000);
        let n = a.dim() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.05, "corr {corr}");
    }

    #[test]
    fn child_does_not_advance_parent() {
        let parent = RngStream::new(1, 2);
        let mut p1 = parent.clone();
        let _ = parent.child(9).gaussian_noise(4);
        let mut p2 = parent.clone();
        assert_eq!(p1.standard_normal(), p2.standard_normal());
        assert_ne!(
            parent.child(1).gaussian_noise(2),
            parent.child(2).gaussian_noise(2)
        );
    }
}
