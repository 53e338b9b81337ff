//! Monte Carlo demonstrations of where the unadjusted realised variation
//! breaks down, and of the sharpness of the spatial regularity condition.
//!
//! All three models use the nilpotent left shift on an `L2` grid whose cell
//! width equals the sampling step, so every relevant vector is a shifted copy
//! `u_k = S(k Delta) X` of one function. Operators are carried as symmetric
//! tridiagonal coefficient matrices in that family and Hilbert–Schmidt inner
//! products reduce to `tr(A G B G)` with the Gram matrix `G` of the shifts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::FbmSampler;
use crate::inference::montecarlo::replicate;
use crate::inference::stats::{convergence_rate_fit, mean_and_se, RateFit};
use crate::quadrature::simpson_weights;

/// Ratio of the last to the first scaled error above which the sharpness
/// demonstration is flagged as divergent.
pub const SHARPNESS_RATIO: f64 = 1.25;

/// Gram matrix `G_{kl} = <S(k Delta) X, S(l Delta) X>` of one-cell shifts of
/// a cell-valued function on a uniform `L2` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftGram {
    gram: DMatrix<f64>,
}

impl ShiftGram {
    /// Shifts `0..=shifts` of the cell values `x` with cell width `h`.
    pub fn new(x: &[f64], h: f64, shifts: usize) -> Result<Self> {
        let j = x.len();
        if shifts >= j {
            return Err(Error::Argument(format!("{shifts} shifts on {j} cells")));
        }
        let m = shifts + 1;
        let mut g = DMatrix::zeros(m, m);
        for l in 0..m {
            let s: f64 = (0..j - l).map(|c| x[c] * x[c + l]).sum();
            g[(0, l)] = h * s;
            g[(l, 0)] = h * s;
        }
        // dropping the leftmost cell: G_{k+1,l+1} = G_{k,l} - h x_k x_l
        for k in 0..shifts {
            for l in k..shifts {
                let v = g[(k, l)] - h * x[k] * x[l];
                g[(k + 1, l + 1)] = v;
                g[(l + 1, k + 1)] = v;
            }
        }
        Ok(ShiftGram { gram: g })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn len(&self) -> usize {
        self.gram.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.nrows() == 0
    }

    fn times(&self, a: &Tridiagonal) -> DMatrix<f64> {
        let m = self.len();
        let g = &self.gram;
        DMatrix::from_fn(m, m, |r, c| {
            let mut v = a.diag[r] * g[(r, c)];
            if r > 0 {
                v += a.off[r - 1] * g[(r - 1, c)];
            }
            if r + 1 < m {
                v += a.off[r] * g[(r + 1, c)];
            }
            v
        })
    }

    /// `<sum A_{kl} u_k u_l^T, sum B_{kl} u_k u_l^T>_HS = tr(A G B G)`.
    pub fn hs_inner(&self, a: &Tridiagonal, b: &Tridiagonal) -> Result<f64> {
        if a.len() != self.len() || b.len() != self.len() {
            return Err(Error::Dimension("coefficient matrix does not match the shifts".into()));
        }
        let ma = self.times(a);
        let mb = self.times(b);
        Ok(ma.component_mul(&mb.transpose()).sum())
    }

    pub fn hs_norm(&self, a: &Tridiagonal) -> Result<f64> {
        Ok(self.hs_inner(a, a)?.max(0.0).sqrt())
    }
}

/// Symmetric tridiagonal coefficients over the shifted copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(m: usize) -> Self {
        Tridiagonal { diag: vec![0.0; m], off: vec![0.0; m.saturating_sub(1)] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Adds `c (a u_k + b u_{k+1})^{(x)2}`.
    fn add_pair_square(&mut self, k: usize, a: f64, b: f64, c: f64) {
        self.diag[k] += c * a * a;
        self.diag[k + 1] += c * b * b;
        self.off[k] += c * a * b;
    }

    fn sub(&self, other: &Tridiagonal) -> Tridiagonal {
        Tridiagonal {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Simpson weights of `int_0^1 u_s^{(x)2} ds` on the nodes `k / n`.
fn target(n: usize) -> Tridiagonal {
    Tridiagonal { diag: simpson_weights(n, 1.0 / n as f64), off: vec![0.0; n] }
}

/// Brownian values `beta_{i Delta}`, `i = 0..n`, drawn as consecutive normals
/// from the seed so that they coincide with a generic one-noise simulation.
pub fn brownian_grid(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sq = (1.0 / n as f64).sqrt();
    let mut b = Vec::with_capacity(n + 1);
    b.push(0.0);
    for _ in 0..n {
        let xi: f64 = rng.sample(StandardNormal);
        b.push(b.last().unwrap() + sq * xi);
    }
    b
}

/// Midpoints of `cells` equal cells of `(0, length)`, prefixed with 0.
fn fbm_grid(length: f64, cells: usize) -> Vec<f64> {
    let h = length / cells as f64;
    std::iter::once(0.0).chain((0..cells).map(|c| (c as f64 + 0.5) * h)).collect()
}

/// Second random stream of a replication seed, used for the spatial path.
fn path_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Estimator matrices of `Y_{i Delta} = beta_i u_i`.
fn estimators(beta: &[f64]) -> (Tridiagonal, Tridiagonal, Tridiagonal) {
    let n = beta.len() - 1;
    let mut sarcv = Tridiagonal::zeros(n + 1);
    let mut rv = Tridiagonal::zeros(n + 1);
    let mut rem = Tridiagonal::zeros(n + 1);
    for i in 1..=n {
        let db = beta[i] - beta[i - 1];
        sarcv.diag[i] += db * db;
        // Y_i - Y_{i-1} = beta_i u_i - beta_{i-1} u_{i-1}
        rv.add_pair_square(i - 1, -beta[i - 1], beta[i], 1.0);
        // (S(Delta) - I) Y_{i-1} = beta_{i-1} (u_i - u_{i-1})
        rem.add_pair_square(i - 1, -1.0, 1.0, beta[i - 1] * beta[i - 1]);
    }
    (sarcv, rv, rem)
}

fn check_grid(n_grid: &[usize], reps: usize) -> Result<()> {
    if n_grid.is_empty() || n_grid[0] < 2 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("n grid must be strictly increasing with n >= 2".into()));
    }
    if reps < 2 {
        return Err(Error::Config("at least two replications are needed".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvLlnConfig {
    pub hurst: f64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed_base: u64,
}

impl Default for RvLlnConfig {
    fn default() -> Self {
        RvLlnConfig { hurst: 0.25, n_grid: vec![64, 128, 256, 512], replications: 200, seed_base: 20_240_501 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvLlnRow {
    pub n: usize,
    pub rv_error_mean: f64,
    pub rv_error_se: f64,
    pub sarcv_error_mean: f64,
    pub sarcv_error_se: f64,
    /// Monte Carlo mean of `||sum_i ((S(Delta) - I) Y_{(i-1) Delta})^{(x)2}||_HS^2`.
    pub remainder_sq_mean: f64,
    /// `Delta^{2 + 4H} sum_i (i - 1)^2`.
    pub lower_bound_scaling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvLlnReport {
    pub config: RvLlnConfig,
    pub rows: Vec<RvLlnRow>,
    /// Relative decrease of the mean SARCV error from the first to the last `n`.
    pub sarcv_decrease: f64,
    /// Whether the mean RV error at the last `n` is at least the first.
    pub divergent: bool,
}

/// `sigma_s = e (x) S(s) X` on `L2(0, 2)` with `X` a fresh fractional
/// Brownian path per replication, nilpotent shift, horizon 1 and `2n` cells.
pub fn rv_lln(cfg: &RvLlnConfig) -> Result<RvLlnReport> {
    check_grid(&cfg.n_grid, cfg.replications)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let cells = 2 * n;
        let h = 1.0 / n as f64;
        let sampler = FbmSampler::new(cfg.hurst, &fbm_grid(2.0, cells))?;
        let tgt = target(n);
        let out = replicate(cfg.replications, cfg.seed_base, |_, seed| {
            let x = sampler.sample(&mut path_rng(seed));
            let g = ShiftGram::new(&x[1..], h, n)?;
            let beta = brownian_grid(n, seed);
            let (sarcv, rv, rem) = estimators(&beta);
            Ok([g.hs_norm(&rv.sub(&tgt))?, g.hs_norm(&sarcv.sub(&tgt))?, g.hs_inner(&rem, &rem)?])
        })?;
        let col = |k: usize| out.iter().map(|o| o[k]).collect::<Vec<f64>>();
        let (rv_m, rv_se) = mean_and_se(&col(0));
        let (sa_m, sa_se) = mean_and_se(&col(1));
        let (rem_m, _) = mean_and_se(&col(2));
        let sq: f64 = (1..=n).map(|i| ((i - 1) as f64).powi(2)).sum();
        rows.push(RvLlnRow {
            n,
            rv_error_mean: rv_m,
            rv_error_se: rv_se,
            sarcv_error_mean: sa_m,
            sarcv_error_se: sa_se,
            remainder_sq_mean: rem_m,
            lower_bound_scaling: h.powf(2.0 + 4.0 * cfg.hurst) * sq,
        });
    }
    let (first, last) = (&rows[0], rows.last().unwrap());
    Ok(RvLlnReport {
        config: cfg.clone(),
        sarcv_decrease: 1.0 - last.sarcv_error_mean / first.sarcv_error_mean,
        divergent: last.rv_error_mean >= first.rv_error_mean,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvCltConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed_base: u64,
}

impl Default for RvCltConfig {
    fn default() -> Self {
        RvCltConfig { n_grid: vec![64, 128, 256, 512], replications: 200, seed_base: 20_240_502 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvCltRow {
    pub n: usize,
    pub rv_bias_mean: f64,
    pub rv_bias_se: f64,
    pub sarcv_bias_mean: f64,
    pub sarcv_bias_se: f64,
    /// `sqrt(n) ||D||_HS`, the predicted RV bias.
    pub predicted_rv_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvCltReport {
    pub config: RvCltConfig,
    pub rows: Vec<RvCltRow>,
    /// Mean RV bias at the last `n` over that at the first.
    pub rv_growth: f64,
    /// Whether every SARCV bias mean lies within 3 standard errors of 0.
    pub sarcv_centered: bool,
}

/// `sigma_s = e (x) S(s) 1_{[1, 2]}` on `L2(0, 3)` with `3n` cells: the
/// indicator model on the real line, translated so that it stays inside the
/// grid up to time 1. Biases are `sqrt(n) <estimator - int Sigma, D / ||D||>`
/// with `D = sum_i (i - 1) Delta (Delta_i S X)^{(x)2}`.
pub fn rv_clt(cfg: &RvCltConfig) -> Result<RvCltReport> {
    check_grid(&cfg.n_grid, cfg.replications)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let h = 1.0 / n as f64;
        let x: Vec<f64> = (0..3 * n).map(|c| if (n..2 * n).contains(&c) { 1.0 } else { 0.0 }).collect();
        let g = ShiftGram::new(&x, h, n)?;
        let tgt = target(n);
        let mut d = Tridiagonal::zeros(n + 1);
        for i in 1..=n {
            d.add_pair_square(i - 1, -1.0, 1.0, (i - 1) as f64 * h);
        }
        let dn = g.hs_norm(&d)?;
        let root = (n as f64).sqrt();
        let out = replicate(cfg.replications, cfg.seed_base, |_, seed| {
            let beta = brownian_grid(n, seed);
            let (sarcv, rv, _) = estimators(&beta);
            Ok([root * g.hs_inner(&rv.sub(&tgt), &d)? / dn, root * g.hs_inner(&sarcv.sub(&tgt), &d)? / dn])
        })?;
        let (rv_m, rv_se) = mean_and_se(&out.iter().map(|o| o[0]).collect::<Vec<_>>());
        let (sa_m, sa_se) = mean_and_se(&out.iter().map(|o| o[1]).collect::<Vec<_>>());
        rows.push(RvCltRow {
            n,
            rv_bias_mean: rv_m,
            rv_bias_se: rv_se,
            sarcv_bias_mean: sa_m,
            sarcv_bias_se: sa_se,
            predicted_rv_bias: root * dn,
        });
    }
    Ok(RvCltReport {
        config: cfg.clone(),
        rv_growth: rows.last().unwrap().rv_bias_mean / rows[0].rv_bias_mean,
        sarcv_centered: rows.iter().all(|r| r.sarcv_bias_mean.abs() <= 3.0 * r.sarcv_bias_se),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessConfig {
    pub hurst: f64,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed_base: u64,
}

impl Default for SharpnessConfig {
    fn default() -> Self {
        SharpnessConfig { hurst: 0.25, n_grid: vec![64, 128, 256, 512], replications: 200, seed_base: 20_240_503 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub n: usize,
    /// `sqrt(n) ||mean(SARCV_1) - X (x) X||_HS` over the replications.
    pub scaled_error: f64,
    /// `sqrt(n) ||S(Delta) X (x) S(Delta) X - X (x) X||_HS`, the exact
    /// expectation of the Euler-sampled estimator.
    pub scaled_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub config: SharpnessConfig,
    pub rows: Vec<SharpnessRow>,
    pub ratio: f64,
    pub divergent: bool,
    /// Log-log slope of the scaled error, predicted near `1/2 - H`.
    pub fit: Option<RateFit>,
}

/// Constant `sigma = e (x) X` on `L2(0, 2)` for one fixed fractional Brownian
/// path `X`, sampled on the finest grid and averaged onto the coarser ones.
pub fn sarcv_clt_sharpness(cfg: &SharpnessConfig) -> Result<SharpnessReport> {
    check_grid(&cfg.n_grid, cfg.replications)?;
    let n_max = *cfg.n_grid.last().unwrap();
    if cfg.n_grid.iter().any(|n| n_max % n != 0) {
        return Err(Error::Config("every n must divide the largest n".into()));
    }
    let fine = FbmSampler::new(cfg.hurst, &fbm_grid(2.0, 2 * n_max))?.sample(&mut path_rng(cfg.seed_base));
    let mut rows = Vec::new();
    for &n in &cfg.n_grid {
        let r = n_max / n;
        let x: Vec<f64> = (0..2 * n).map(|c| fine[1 + c * r..1 + (c + 1) * r].iter().sum::<f64>() / r as f64).collect();
        let g = ShiftGram::new(&x, 1.0 / n as f64, 1)?;
        let (g00, g01, g11) = (g.gram[(0, 0)], g.gram[(0, 1)], g.gram[(1, 1)]);
        // || q u_1 u_1^T - u_0 u_0^T ||^2
        let err = |q: f64| (q * q * g11 * g11 - 2.0 * q * g01 * g01 + g00 * g00).max(0.0).sqrt();
        let q = replicate(cfg.replications, cfg.seed_base, |_, seed| {
            let beta = brownian_grid(n, seed);
            Ok(beta.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>())
        })?;
        let qbar = q.iter().sum::<f64>() / q.len() as f64;
        let root = (n as f64).sqrt();
        rows.push(SharpnessRow { n, scaled_error: root * err(qbar), scaled_bias: root * err(1.0) });
    }
    let ratio = rows.last().unwrap().scaled_error / rows[0].scaled_error;
    let fit = if rows.len() >= 2 {
        let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.scaled_error).collect();
        convergence_rate_fit(&ns, &e).ok()
    } else {
        None
    };
    Ok(SharpnessReport { config: cfg.clone(), divergent: ratio > SHARPNESS_RATIO, ratio, rows, fit })
}
