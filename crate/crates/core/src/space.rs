//! Discretized Hilbert spaces and the curves that live in them.
//!
//! Three representations are supported:
//!
//! * `L2 { a, b, points }`: piecewise-constant functions on `points` cells of
//!   width `h = (b - a) / points`; coefficients are cell values (sampled at
//!   cell midpoints) and the inner product is `h * sum f_k g_k`.
//! * `H1 { nodes }`: the Sobolev space on `(0, 1)` with norm
//!   `h(0)^2 + int h'^2`, whose reproducing kernel is `k(x, y) = 1 + min(x, y)`.
//!   Coefficients are weights on the kernel frame `k(x_k, .)` at the nodes
//!   `x_k = k / (nodes - 1)`, node `0` included, so the frame spans exactly the
//!   continuous piecewise-linear functions on the node grid.
//! * `Spectral { modes }`: coefficients on `e_j(x) = sqrt(2) sin(pi j x)`,
//!   `j = 1..=modes`, an orthonormal basis of `L2(0, 1)`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceSpec {
    L2 { a: f64, b: f64, points: usize },
    H1 { nodes: usize },
    Spectral { modes: usize },
}

impl SpaceSpec {
    pub fn l2(a: f64, b: f64, points: usize) -> Result<Self> {
        let s = SpaceSpec::L2 { a, b, points };
        s.validate()?;
        Ok(s)
    }

    pub fn h1(nodes: usize) -> Result<Self> {
        let s = SpaceSpec::H1 { nodes };
        s.validate()?;
        Ok(s)
    }

    pub fn spectral(modes: usize) -> Result<Self> {
        let s = SpaceSpec::Spectral { modes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpaceSpec::L2 { a, b, points } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::Argument(format!("L2 interval ({a}, {b}) is empty")));
                }
                if points == 0 {
                    return Err(Error::Argument("L2 grid needs at least one cell".into()));
                }
            }
            SpaceSpec::H1 { nodes } => {
                if nodes < 2 {
                    return Err(Error::Argument("H1 frame needs at least two nodes".into()));
                }
            }
            SpaceSpec::Spectral { modes } => {
                if modes == 0 {
                    return Err(Error::Argument("spectral space needs at least one mode".into()));
                }
            }
        }
        Ok(())
    }

    /// Number of coefficients `J`.
    pub fn dim(&self) -> usize {
        match *self {
            SpaceSpec::L2 { points, .. } => points,
            SpaceSpec::H1 { nodes } => nodes,
            SpaceSpec::Spectral { modes } => modes,
        }
    }

    /// Spatial grid step: cell width for `L2`, node spacing for `H1`.
    pub fn step(&self) -> Option<f64> {
        match *self {
            SpaceSpec::L2 { a, b, points } => Some((b - a) / points as f64),
            SpaceSpec::H1 { nodes } => Some(1.0 / (nodes - 1) as f64),
            SpaceSpec::Spectral { .. } => None,
        }
    }

    /// Domain of the curves.
    pub fn domain(&self) -> (f64, f64) {
        match *self {
            SpaceSpec::L2 { a, b, .. } => (a, b),
            _ => (0.0, 1.0),
        }
    }

    /// Locations attached to the coefficients: cell midpoints, nodes, or mode
    /// numbers.
    pub fn grid_points(&self) -> Vec<f64> {
        match *self {
            SpaceSpec::L2 { a, points, .. } => {
                let h = self.step().unwrap();
                (0..points).map(|k| a + (k as f64 + 0.5) * h).collect()
            }
            SpaceSpec::H1 { nodes } => {
                let h = self.step().unwrap();
                (0..nodes).map(|k| k as f64 * h).collect()
            }
            SpaceSpec::Spectral { modes } => (1..=modes).map(|j| j as f64).collect(),
        }
    }

    /// `G v` where `G` is the Gram matrix of the coefficient frame.
    ///
    /// For `H1` this equals the node values of the function with coefficients
    /// `v`, computed in linear time.
    pub fn gram_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match *self {
            SpaceSpec::L2 { .. } => v * self.step().unwrap(),
            SpaceSpec::H1 { .. } => DVector::from_vec(h1_node_values(v.as_slice())),
            SpaceSpec::Spectral { .. } => v.clone(),
        }
    }

    pub fn gram_apply_slice(&self, v: &[f64]) -> Vec<f64> {
        match *self {
            SpaceSpec::L2 { .. } => {
                let h = self.step().unwrap();
                v.iter().map(|x| x * h).collect()
            }
            SpaceSpec::H1 { .. } => h1_node_values(v),
            SpaceSpec::Spectral { .. } => v.to_vec(),
        }
    }

    /// Dense Gram matrix.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let j = self.dim();
        match *self {
            SpaceSpec::L2 { .. } => DMatrix::identity(j, j) * self.step().unwrap(),
            SpaceSpec::H1 { .. } => {
                let x = self.grid_points();
                DMatrix::from_fn(j, j, |k, l| 1.0 + x[k].min(x[l]))
            }
            SpaceSpec::Spectral { .. } => DMatrix::identity(j, j),
        }
    }

    pub fn inner_coeffs(&self, f: &[f64], g: &[f64]) -> f64 {
        match *self {
            SpaceSpec::L2 { .. } => self.step().unwrap() * dot(f, g),
            SpaceSpec::H1 { .. } => dot(&h1_node_values(f), g),
            SpaceSpec::Spectral { .. } => dot(f, g),
        }
    }

    pub(crate) fn check_same(&self, other: &SpaceSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Dimension(format!("space {self:?} does not match {other:?}")))
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Node values `f(x_k)` of `f = sum_l c_l k(x_l, .)` on a uniform node grid
/// starting at `0`.
pub(crate) fn h1_node_values(c: &[f64]) -> Vec<f64> {
    let j = c.len();
    let dx = 1.0 / (j - 1) as f64;
    // slope on cell i (between nodes i-1 and i) is the suffix sum of c from i
    let mut suffix = vec![0.0; j + 1];
    for l in (0..j).rev() {
        suffix[l] = suffix[l + 1] + c[l];
    }
    let mut v = vec![0.0; j];
    v[0] = suffix[0];
    for i in 1..j {
        v[i] = v[i - 1] + dx * suffix[i];
    }
    v
}

/// Inverse of [`h1_node_values`]: kernel-frame coefficients of the
/// piecewise-linear interpolant of the node values `v`.
pub(crate) fn h1_coeffs_from_values(v: &[f64]) -> Vec<f64> {
    let j = v.len();
    let dx = 1.0 / (j - 1) as f64;
    let slope = |i: usize| if i < j { (v[i] - v[i - 1]) / dx } else { 0.0 };
    let mut c = vec![0.0; j];
    c[0] = v[0] - slope(1);
    for l in 1..j {
        c[l] = slope(l) - slope(l + 1);
    }
    c
}

/// A curve in a discretized space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    space: SpaceSpec,
    coeffs: DVector<f64>,
}

impl GridFunction {
    pub fn new(space: SpaceSpec, coeffs: DVector<f64>) -> Result<Self> {
        space.validate()?;
        if coeffs.len() != space.dim() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("non-finite coefficient".into()));
        }
        Ok(GridFunction { space, coeffs })
    }

    pub fn from_vec(space: SpaceSpec, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(space, DVector::from_vec(coeffs))
    }

    pub(crate) fn from_parts_unchecked(space: SpaceSpec, coeffs: DVector<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), space.dim());
        GridFunction { space, coeffs }
    }

    pub fn zeros(space: SpaceSpec) -> Self {
        GridFunction { space, coeffs: DVector::zeros(space.dim()) }
    }

    /// Discretizes a function given pointwise.
    ///
    /// `L2` samples at cell midpoints, `H1` interpolates at the nodes, and
    /// `Spectral` projects onto the modes by composite Simpson quadrature.
    pub fn from_fn(space: SpaceSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        space.validate()?;
        let coeffs = match space {
            SpaceSpec::L2 { .. } => space.grid_points().into_iter().map(&f).collect(),
            SpaceSpec::H1 { .. } => {
                let v: Vec<f64> = space.grid_points().into_iter().map(&f).collect();
                h1_coeffs_from_values(&v)
            }
            SpaceSpec::Spectral { modes } => {
                let m = 4096;
                let xs: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
                let fx: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
                (1..=modes)
                    .map(|j| {
                        let vals: Vec<f64> =
                            xs.iter().zip(&fx).map(|(&x, &y)| y * SQRT_2 * (PI * j as f64 * x).sin()).collect();
                        crate::quadrature::simpson_uniform(&vals, 1.0 / m as f64)
                    })
                    .collect()
            }
        };
        Self::from_vec(space, coeffs)
    }

    /// `H1` element with the given node values.
    pub fn from_node_values(space: SpaceSpec, values: &[f64]) -> Result<Self> {
        match space {
            SpaceSpec::H1 { nodes } if nodes == values.len() => Self::from_vec(space, h1_coeffs_from_values(values)),
            SpaceSpec::H1 { nodes } => Err(Error::Dimension(format!("{} node values for {nodes} nodes", values.len()))),
            _ => Err(Error::Argument("node values only define H1 elements".into())),
        }
    }

    /// Spectral basis vector `e_j` (1-based), the unit vector of a grid cell
    /// for `L2`, or the kernel section `k(x_j, .)` for `H1` (0-based node).
    pub fn basis(space: SpaceSpec, j: usize) -> Result<Self> {
        let (idx, ok) = match space {
            SpaceSpec::Spectral { modes } => (j.wrapping_sub(1), (1..=modes).contains(&j)),
            _ => (j, j < space.dim()),
        };
        if !ok {
            return Err(Error::Range(format!("basis index {j} outside the frame")));
        }
        let mut c = DVector::zeros(space.dim());
        c[idx] = 1.0;
        Self::new(space, c)
    }

    /// Indicator `1_[lo, hi]`.
    ///
    /// `L2` uses the exact cell overlap fraction, so inner products are exact
    /// whenever the endpoints fall on cell boundaries. `Spectral` uses the
    /// analytic mode integrals. Indicators are not elements of `H1`.
    pub fn indicator(space: SpaceSpec, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Argument(format!("empty interval [{lo}, {hi}]")));
        }
        match space {
            SpaceSpec::L2 { a, points, .. } => {
                let h = space.step().unwrap();
                // endpoints in cell units, snapped so boundaries give exact 0/1
                let snap = |u: f64| if (u - u.round()).abs() < 1e-9 { u.round() } else { u };
                let (l, r) = (snap((lo - a) / h), snap((hi - a) / h));
                let c = (0..points)
                    .map(|k| {
                        let k = k as f64;
                        (r.min(k + 1.0) - l.max(k)).max(0.0)
                    })
                    .collect();
                Self::from_vec(space, c)
            }
            SpaceSpec::Spectral { modes } => {
                let (lo, hi) = (lo.max(0.0), hi.min(1.0));
                let c = (1..=modes)
                    .map(|j| {
                        let w = PI * j as f64;
                        if hi <= lo {
                            0.0
                        } else {
                            SQRT_2 * ((w * lo).cos() - (w * hi).cos()) / w
                        }
                    })
                    .collect();
                Self::from_vec(space, c)
            }
            SpaceSpec::H1 { .. } => Err(Error::Argument("indicators are not elements of H1".into())),
        }
    }

    /// Riesz representer of point evaluation `f -> f(x)` projected onto the
    /// `H1` frame. Exact for `x` on a node; for other `x` it represents
    /// evaluation restricted to the frame.
    pub fn evaluation(space: SpaceSpec, x: f64) -> Result<Self> {
        match space {
            SpaceSpec::H1 { .. } => {
                if !(0.0..=1.0).contains(&x) {
                    return Err(Error::Domain(format!("evaluation point {x} outside [0, 1]")));
                }
                let v: Vec<f64> = space.grid_points().iter().map(|&y| 1.0 + x.min(y)).collect();
                Self::from_node_values(space, &v)
            }
            _ => Err(Error::Argument("point evaluation is only bounded on the H1 space".into())),
        }
    }

    pub fn space(&self) -> SpaceSpec {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> DVector<f64> {
        self.coeffs
    }

    /// Coefficients of the Riesz dual, `G c`; `inner(f, g) = dual(f) . c_g`.
    pub fn dual(&self) -> DVector<f64> {
        self.space.gram_apply(&self.coeffs)
    }

    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        self.space.check_same(&other.space)?;
        Ok(self.space.inner_coeffs(self.coeffs.as_slice(), other.coeffs.as_slice()))
    }

    pub fn norm(&self) -> f64 {
        self.space.inner_coeffs(self.coeffs.as_slice(), self.coeffs.as_slice()).max(0.0).sqrt()
    }

    /// Pointwise value at `x`.
    pub fn eval_at(&self, x: f64) -> f64 {
        let c = self.coeffs.as_slice();
        match self.space {
            SpaceSpec::L2 { a, b, points } => {
                if x < a || x > b {
                    return 0.0;
                }
                let h = (b - a) / points as f64;
                let k = (((x - a) / h).floor() as usize).min(points - 1);
                c[k]
            }
            SpaceSpec::H1 { .. } => {
                let nodes = self.space.grid_points();
                nodes.iter().zip(c).map(|(&xk, ck)| ck * (1.0 + xk.min(x))).sum()
            }
            SpaceSpec::Spectral { .. } => {
                c.iter().enumerate().map(|(j, cj)| cj * SQRT_2 * (PI * (j + 1) as f64 * x).sin()).sum()
            }
        }
    }

    /// Node values of an `H1` element.
    pub fn node_values(&self) -> Result<Vec<f64>> {
        match self.space {
            SpaceSpec::H1 { .. } => Ok(h1_node_values(self.coeffs.as_slice())),
            _ => Err(Error::Argument("node values are defined for H1 only".into())),
        }
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        GridFunction { space: self.space, coeffs: &self.coeffs * c }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &GridFunction) -> Result<GridFunction> {
        self.space.check_same(&other.space)?;
        Ok(GridFunction { space: self.space, coeffs: &self.coeffs + &other.coeffs * c })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.add_scaled(-1.0, other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    /// Keep modes `1..=N`.
    KeepLow,
    /// Keep modes `N..=J`.
    KeepHigh,
}

/// Zeroes the spectral modes outside the requested band.
pub fn truncate_basis(f: &GridFunction, n: usize, band: Band) -> Result<GridFunction> {
    let SpaceSpec::Spectral { modes } = f.space else {
        return Err(Error::Argument("basis truncation needs a spectral space".into()));
    };
    if n > modes {
        return Err(Error::Range(format!("cutoff {n} exceeds {modes} modes")));
    }
    let mut c = f.coeffs.clone();
    for (idx, v) in c.iter_mut().enumerate() {
        let j = idx + 1;
        let keep = match band {
            Band::KeepLow => j <= n,
            Band::KeepHigh => j >= n,
        };
        if !keep {
            *v = 0.0;
        }
    }
    Ok(GridFunction { space: f.space, coeffs: c })
}
