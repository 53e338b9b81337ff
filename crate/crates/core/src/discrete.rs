//! Estimators for data observed on a space-time grid.
//!
//! Curves sampled at the nodes `x_j = j Delta`, `j = 1..n`, are interpolated
//! in `H1(0, 1)` by the minimal-norm kernel interpolant for
//! `k(x, y) = 1 + min(x, y)`. The heat pipeline instead works with local
//! averages over `m` bins of `(0, 1)`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::clt::Interval;
use crate::operator::HSOperator;
use crate::simulate::PathSample;
use crate::space::{GridFunction, SpaceSpec};
use crate::volatility::VolModel;

/// Largest accepted max-abs residual of `K Kinv - I`.
pub const KINV_TOLERANCE: f64 = 1e-8;

/// Closed-form inverse of `K_n = (1 + min(j1, j2) / n)_{j1, j2 = 1..n}`:
/// tridiagonal with `-n` off the diagonal, `2n` on the interior diagonal,
/// `n` in the last diagonal entry and `2 + (n^2 - 2) / (n + 1)` in the first.
pub fn kernel_inverse_closed_form(n: usize) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::Argument("the kernel system needs at least two nodes".into()));
    }
    let nf = n as f64;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 2.0 * nf;
        if i + 1 < n {
            m[(i, i + 1)] = -nf;
            m[(i + 1, i)] = -nf;
        }
    }
    m[(n - 1, n - 1)] = nf;
    m[(0, 0)] = 2.0 + (nf * nf - 2.0) / (nf + 1.0);
    Ok(m)
}

/// Kernel matrix on the nodes `j / n`, `j = 1..n`, with its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSystem {
    n: usize,
    k: DMatrix<f64>,
    kinv: DMatrix<f64>,
    closed_form: bool,
    residual: f64,
}

fn residual(k: &DMatrix<f64>, kinv: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    (k * kinv - DMatrix::<f64>::identity(n, n)).amax()
}

impl KernelSystem {
    /// Builds the system, validating the closed-form inverse and falling back
    /// to a Cholesky inverse when its residual is too large.
    pub fn new(n: usize) -> Result<Self> {
        let candidate = kernel_inverse_closed_form(n)?;
        let dx = 1.0 / n as f64;
        let k = DMatrix::from_fn(n, n, |a, b| 1.0 + dx * ((a.min(b) + 1) as f64));
        let r = residual(&k, &candidate);
        if r <= KINV_TOLERANCE {
            return Ok(KernelSystem { n, k, kinv: candidate, closed_form: true, residual: r });
        }
        let kinv = k
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("kernel matrix is not positive definite".into()))?
            .inverse();
        let kinv = (&kinv + kinv.transpose()) * 0.5;
        let fallback = residual(&k, &kinv);
        log::warn!(
            "closed-form kernel inverse rejected for n = {n}: residual {r:e}; Cholesky inverse residual {fallback:e}"
        );
        Ok(KernelSystem { n, k, kinv, closed_form: false, residual: fallback })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn kinv(&self) -> &DMatrix<f64> {
        &self.kinv
    }

    /// Whether the closed form passed validation.
    pub fn uses_closed_form(&self) -> bool {
        self.closed_form
    }

    /// Max-abs residual of `K Kinv - I` for the inverse in use.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `H1` space holding the interpolants: nodes `0, 1/n, ..., 1`.
    pub fn space(&self) -> SpaceSpec {
        SpaceSpec::H1 { nodes: self.n + 1 }
    }

    /// Interpolation weights `Kinv v` for the nodes `1..n`.
    pub fn weights(&self, values: &DVector<f64>) -> DVector<f64> {
        &self.kinv * values
    }
}

/// Minimal-norm interpolant `sum_j alpha_j k(j / n, .)` of node samples.
pub fn project_h1(values: &[f64], ks: &KernelSystem) -> Result<GridFunction> {
    if values.len() != ks.n {
        return Err(Error::Dimension(format!("{} samples for {} nodes", values.len(), ks.n)));
    }
    let alpha = ks.weights(&DVector::from_column_slice(values));
    let mut c = DVector::zeros(ks.n + 1);
    c.rows_mut(1, ks.n).copy_from(&alpha);
    GridFunction::new(ks.space(), c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseTag {
    /// Semimartingale data, raw increments.
    A,
    /// Shift semigroup data, increments adjusted by one spatial step.
    B,
    /// Local averages of a heat-equation solution.
    Heat,
}

impl CaseTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseTag::A => "a",
            CaseTag::B => "b",
            CaseTag::Heat => "heat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(CaseTag::A),
            "b" => Ok(CaseTag::B),
            "heat" => Ok(CaseTag::Heat),
            other => Err(Error::Argument(format!("unknown sampling case {other:?}"))),
        }
    }
}

/// Values `Y_{i dt}(x_j)` for `i = 0..n` (rows) and `j = 1..m` (columns).
///
/// For cases `a` and `b`, `x_j = j dx`; for heat data column `j` is the
/// average over the bin `((j-1) dx, j dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSample {
    values: DMatrix<f64>,
    space_step: f64,
    time_step: f64,
    case: CaseTag,
}

impl DiscreteSample {
    pub fn new(values: DMatrix<f64>, space_step: f64, time_step: f64, case: CaseTag) -> Result<Self> {
        if values.nrows() < 1 || values.ncols() < 1 {
            return Err(Error::Dimension("empty sample".into()));
        }
        if !(space_step > 0.0 && time_step > 0.0) {
            return Err(Error::Argument("steps must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite sample value".into()));
        }
        Ok(DiscreteSample { values, space_step, time_step, case })
    }

    /// Samples an `H1` path at its nodes `j / (J - 1)`, `j = 1..J-1`.
    pub fn from_h1_path(path: &PathSample, case: CaseTag) -> Result<Self> {
        let SpaceSpec::H1 { nodes } = path.space() else {
            return Err(Error::Argument("grid sampling needs an H1 path".into()));
        };
        let m = nodes - 1;
        let mut values = DMatrix::zeros(path.n() + 1, m);
        for i in 0..=path.n() {
            let v = path.observation(i).node_values()?;
            for j in 0..m {
                values[(i, j)] = v[j + 1];
            }
        }
        Self::new(values, 1.0 / m as f64, path.dt(), case)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn space_step(&self) -> f64 {
        self.space_step
    }

    pub fn time_step(&self) -> f64 {
        self.time_step
    }

    pub fn case(&self) -> CaseTag {
        self.case
    }

    /// Number of time increments.
    pub fn n(&self) -> usize {
        self.values.nrows() - 1
    }

    /// Number of spatial points or bins.
    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    /// Increment values `Y_i(x_j) - Y_{i-1}(x_{j + offset})`, holding the
    /// last node, as an `m x n` matrix.
    pub fn shifted_increments(&self, offset: usize) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        DMatrix::from_fn(m, n, |j, i| {
            let src = (j + offset).min(m - 1);
            self.values[(i + 1, j)] - self.values[(i, src)]
        })
    }

    fn offset_for(&self, case: CaseTag) -> Result<usize> {
        match case {
            CaseTag::A => Ok(0),
            CaseTag::B => {
                if (self.space_step - self.time_step).abs() > 1e-12 * self.time_step.max(self.space_step) {
                    return Err(Error::Config(format!(
                        "case b needs equal steps, got dx = {} and dt = {}",
                        self.space_step, self.time_step
                    )));
                }
                Ok(1)
            }
            CaseTag::Heat => Err(Error::Argument("heat samples use the local-average estimator".into())),
        }
    }
}

/// `sum_i (Pi_n d_i)^{(x)2}` over node increments shifted by `offset`
/// spatial steps.
pub fn sigma_hat_discrete_shifted(data: &DiscreteSample, offset: usize) -> Result<HSOperator> {
    let m = data.m();
    let ks = KernelSystem::new(m)?;
    let d = data.shifted_increments(offset);
    let alpha = ks.kinv() * d;
    let mut cols = DMatrix::zeros(m + 1, data.n());
    cols.rows_mut(1, m).copy_from(&alpha);
    HSOperator::sum_of_squares(ks.space(), &cols)
}

/// Projected realised covariation: raw increments in case `a`, increments
/// `Y_i(x_j) - Y_{i-1}(x_{j+1})` in case `b` with `Y_i(1) - Y_{i-1}(1)` at
/// the last node.
pub fn sigma_hat_discrete(data: &DiscreteSample, case: CaseTag) -> Result<HSOperator> {
    let offset = data.offset_for(case)?;
    sigma_hat_discrete_shifted(data, offset)
}

/// Pointwise realised variance at a node with its feasible interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseEstimate {
    pub x: f64,
    /// Cumulative sums of squared increments, starting at 0.
    pub cumulative: Vec<f64>,
    /// `sum v_i^4 - sum v_i^2 v_{i+1}^2`.
    pub quarticity: f64,
    squares: Vec<f64>,
    dt: f64,
}

impl PointwiseEstimate {
    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Interval `total -/+ z sqrt(quarticity)`.
    pub fn interval(&self, level: f64) -> Result<Interval> {
        Interval::from_pairings(&self.squares, self.dt, level)
    }
}

/// Realised variance of `t -> Y_t(x)` from raw (case `a`) or shift-adjusted
/// (case `b`) increments.
pub fn pointwise_vol_estimate(data: &DiscreteSample, x: f64, case: CaseTag) -> Result<PointwiseEstimate> {
    let offset = data.offset_for(case)?;
    let pos = x / data.space_step;
    let j = pos.round();
    if (pos - j).abs() > 1e-9 * j.max(1.0) || j < 1.0 || j as usize > data.m() {
        return Err(Error::Grid(format!("point {x} is not a sampling node")));
    }
    let col = j as usize - 1;
    let m = data.m();
    let src = (col + offset).min(m - 1);
    let squares: Vec<f64> = (1..=data.n())
        .map(|i| {
            let v = data.values[(i, col)] - data.values[(i - 1, src)];
            v * v
        })
        .collect();
    let mut cumulative = Vec::with_capacity(squares.len() + 1);
    cumulative.push(0.0);
    for s in &squares {
        cumulative.push(cumulative.last().unwrap() + s);
    }
    let quarticity = squares.iter().map(|s| s * s).sum::<f64>() - squares.windows(2).map(|w| w[0] * w[1]).sum::<f64>();
    Ok(PointwiseEstimate { x, cumulative, quarticity, squares, dt: data.time_step })
}

/// `(1 / dx) int_{(j-1) dx}^{j dx} e_k(x) dx` for `j = 1..m` (rows) and
/// `k = 1..modes` (columns).
pub fn bin_average_matrix(m: usize, modes: usize) -> DMatrix<f64> {
    let dx = 1.0 / m as f64;
    DMatrix::from_fn(m, modes, |j, k| {
        let w = PI * (k + 1) as f64;
        let (a, b) = (j as f64 * dx, (j + 1) as f64 * dx);
        SQRT_2 * ((w * a).cos() - (w * b).cos()) / w / dx
    })
}

/// Bin averages of each observation over `m` equal bins of `(0, 1)`.
///
/// Spectral paths are averaged exactly through the mode integrals; `L2`
/// paths on `(0, 1)` need a cell count divisible by `m`.
pub fn local_average_ingest(path: &PathSample, m: usize) -> Result<DiscreteSample> {
    if m == 0 {
        return Err(Error::Argument("at least one bin is needed".into()));
    }
    let vals = path.values();
    let averaged = match path.space() {
        SpaceSpec::Spectral { modes } => bin_average_matrix(m, modes) * vals,
        SpaceSpec::L2 { a, b, points } => {
            if a != 0.0 || b != 1.0 || points % m != 0 {
                return Err(Error::Argument(format!(
                    "L2 grid with {points} cells on ({a}, {b}) cannot be averaged into {m} bins of (0, 1)"
                )));
            }
            let r = points / m;
            DMatrix::from_fn(m, vals.ncols(), |j, i| (0..r).map(|c| vals[(j * r + c, i)]).sum::<f64>() / r as f64)
        }
        SpaceSpec::H1 { .. } => {
            return Err(Error::Argument("local averages are taken from spectral or L2 paths".into()))
        }
    };
    DiscreteSample::new(averaged.transpose(), 1.0 / m as f64, path.dt(), CaseTag::Heat)
}

/// Space of piecewise-constant functions on `m` bins of `(0, 1)`.
pub fn bin_space(m: usize) -> Result<SpaceSpec> {
    SpaceSpec::l2(0.0, 1.0, m)
}

/// `sum_{i <= t / dt} (Pi_m Delta_i Y)^{(x)2}` on the piecewise-constant
/// subspace. The orthonormal frame is `dx^{-1/2} 1_{bin}`; the stored kernel
/// holds products of bin values.
pub fn sigma_hat_heat(data: &DiscreteSample, t: f64) -> Result<HSOperator> {
    if data.case != CaseTag::Heat {
        return Err(Error::Argument("heat estimator needs local-average data".into()));
    }
    let k = ((t / data.time_step) + 1e-9).floor() as usize;
    if k > data.n() {
        return Err(Error::Window(format!("time {t} exceeds the sample")));
    }
    let d = data.shifted_increments(0);
    HSOperator::sum_of_squares(bin_space(data.m())?, &d.columns(0, k).into_owned())
}

/// `Pi_m (t Q) Pi_m` for an unmodulated diagonal model on the sine basis.
pub fn heat_target(vol: &VolModel, t: f64, m: usize) -> Result<HSOperator> {
    let q = vol.diagonal_weights().ok_or_else(|| Error::Argument("heat target needs a diagonal covariance".into()))?;
    let a = bin_average_matrix(m, q.len());
    let qd = DMatrix::from_diagonal(&q.component_mul(q));
    let k = &a * qd * a.transpose() * t;
    HSOperator::new(bin_space(m)?, (&k + k.transpose()) * 0.5, true)
}
