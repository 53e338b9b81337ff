//! Descriptive summaries used by the Monte Carlo campaigns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::normal::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov–Smirnov distance to the standard normal law.
    pub ks_distance: f64,
}

/// Moments and the Kolmogorov–Smirnov distance to `N(0, 1)`.
pub fn normality_diagnostics(samples: &[f64]) -> Result<NormalityReport> {
    let n = samples.len();
    if n < 30 {
        return Err(Error::Argument(format!("{n} samples; at least 30 are needed")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite sample".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let (skewness, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut ks: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal_cdf(*x);
        ks = ks.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    Ok(NormalityReport { samples: n, mean, variance, skewness, excess_kurtosis, ks_distance: ks })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log error` against `log n`.
///
/// Nonpositive errors are dropped with a warning; at least three distinct
/// `n` must remain.
pub fn convergence_rate_fit(ns: &[usize], errors: &[f64]) -> Result<RateFit> {
    if ns.len() != errors.len() {
        return Err(Error::Argument("grid and error series differ in length".into()));
    }
    let mut pts = Vec::with_capacity(ns.len());
    for (&n, &e) in ns.iter().zip(errors) {
        if e > 0.0 && e.is_finite() && n > 0 {
            pts.push(((n as f64).ln(), e.ln()));
        } else {
            log::warn!("dropping error {e} at n = {n} from the rate fit");
        }
    }
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Argument("rate fit needs at least three distinct n".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 1e-300 { 1.0 - sse / syy } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn standard_normals_pass_moment_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let r = normality_diagnostics(&xs).unwrap();
        assert!(r.mean.abs() < 0.05);
        assert!((r.variance - 1.0).abs() < 0.05);
        assert!(r.ks_distance < 0.02);
    }

    #[test]
    fn constant_samples() {
        let r = normality_diagnostics(&[0.0; 40]).unwrap();
        assert_eq!(r.variance, 0.0);
        assert!((r.ks_distance - 0.5).abs() < 1e-12);
        assert!(normality_diagnostics(&[0.0; 29]).is_err());
    }

    #[test]
    fn exact_power_law_and_constant_series() {
        let ns = [64, 128, 256, 512];
        let e: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.5)).collect();
        let fit = convergence_rate_fit(&ns, &e).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let flat = convergence_rate_fit(&ns, &[0.2; 4]).unwrap();
        assert!(flat.slope.abs() < 1e-12);
        assert!(convergence_rate_fit(&[1, 2], &[1.0, 0.5]).is_err());
        assert!(convergence_rate_fit(&[1, 2, 3, 4], &[1.0, -1.0, 0.5, 0.0]).is_err());
    }
}
