//! Exact fractional Brownian motion on a finite grid via Cholesky factors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `Cov(B_s, B_t) = (s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * (s.abs().powf(e) + t.abs().powf(e) - (t - s).abs().powf(e))
}

/// Cached Cholesky factor of the fBm covariance on a grid.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    hurst: f64,
    grid: Vec<f64>,
    // factor over the grid points after the leading zero
    factor: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(hurst: f64, grid: &[f64]) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::Argument(format!("Hurst index {hurst} outside (0, 1)")));
        }
        if grid.is_empty() || grid[0] != 0.0 {
            return Err(Error::Argument("fBm grid must start at 0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("fBm grid must be strictly increasing".into()));
        }
        let pts = &grid[1..];
        let n = pts.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(hurst, pts[i], pts[j]));
        let scale = (0..n).map(|i| cov[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut jitter = 0.0;
        let factor = loop {
            let mut c = cov.clone();
            for i in 0..n {
                c[(i, i)] += jitter;
            }
            if let Some(ch) = c.cholesky() {
                if jitter > 0.0 {
                    log::warn!("fBm covariance needed diagonal jitter {jitter:e}");
                }
                break ch.l();
            }
            jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 10.0 };
            if jitter > 1e-8 * scale {
                return Err(Error::Numerical("fBm covariance is not positive definite after jitter".into()));
            }
        };
        Ok(FbmSampler { hurst, grid: grid.to_vec(), factor })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// One path on the grid; the first entry is `B_0 = 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.factor.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut path = Vec::with_capacity(n + 1);
        path.push(0.0);
        path.extend((&self.factor * z).iter());
        path
    }
}

/// One seeded fBm path on `grid`.
pub fn sample_fbm(hurst: f64, grid: &[f64], seed: u64) -> Result<Vec<f64>> {
    let sampler = FbmSampler::new(hurst, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero_and_is_seeded() {
        let grid: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
        let a = sample_fbm(0.3, &grid, 5).unwrap();
        let b = sample_fbm(0.3, &grid, 5).unwrap();
        assert_eq!(a[0], 0.0);
        assert_eq!(a, b);
        assert_ne!(a, sample_fbm(0.3, &grid, 6).unwrap());
    }

    #[test]
    fn brownian_case_has_min_covariance() {
        for (s, t) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            assert!((fbm_covariance(0.5, s, t) - f64::min(s, t)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(FbmSampler::new(1.0, &[0.0, 1.0]).is_err());
        assert!(FbmSampler::new(0.5, &[0.1, 1.0]).is_err());
        assert!(FbmSampler::new(0.5, &[0.0, 0.5, 0.5]).is_err());
    }
}
